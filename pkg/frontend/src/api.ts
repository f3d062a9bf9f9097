/** Typed client for the re-editing HTTP API. */

export interface SessionResponse {
  id: string;
  num_ops: number;
  strengths: number[];
  predicted_strengths: number[];
  preview: string; // base64 PNG
  width: number;
  height: number;
  recomputed_ops: number;
  recomputed_ops_total: number;
  cache_hits_total: number;
  intermediates?: string[];
}

export interface ApiError {
  status: number;
  message: string;
}

async function parseOrThrow(resp: Response): Promise<SessionResponse> {
  if (!resp.ok) {
    let message = resp.statusText;
    try {
      const body = await resp.json();
      if (body && typeof body.error === "string") message = body.error;
    } catch {
      /* non-JSON error body */
    }
    throw { status: resp.status, message } satisfies ApiError;
  }
  return (await resp.json()) as SessionResponse;
}

export async function createSession(file: File): Promise<SessionResponse> {
  const form = new FormData();
  form.append("file", file);
  return parseOrThrow(await fetch("/sessions", { method: "POST", body: form }));
}

export async function getSession(
  id: string,
  intermediates = false,
): Promise<SessionResponse> {
  const q = intermediates ? "?intermediates=true" : "";
  return parseOrThrow(await fetch(`/sessions/${id}${q}`));
}

export async function patchStrengths(
  id: string,
  strengths: number[],
  intermediates = false,
): Promise<SessionResponse> {
  const q = intermediates ? "?intermediates=true" : "";
  return parseOrThrow(
    await fetch(`/sessions/${id}/strengths${q}`, {
      method: "PATCH",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ strengths }),
    }),
  );
}

export async function fetchFullRender(id: string): Promise<Blob> {
  const resp = await fetch(`/sessions/${id}/full`);
  if (!resp.ok) throw { status: resp.status, message: resp.statusText };
  return resp.blob();
}

export async function deleteSession(id: string): Promise<void> {
  await fetch(`/sessions/${id}`, { method: "DELETE" });
}
