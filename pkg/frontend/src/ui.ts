/** DOM wiring: upload, sliders, preview, intermediates strip, download. */

import {
  createSession,
  fetchFullRender,
  getSession,
  patchStrengths,
  SessionResponse,
} from "./api.js";
import { SliderSession } from "./session.js";

const SLIDER_MIN = -2;
const SLIDER_MAX = 2;
const SLIDER_STEP = 0.01;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function showPreview(img: HTMLImageElement, b64: string): void {
  img.src = `data:image/png;base64,${b64}`;
}

function toast(message: string): void {
  const box = el<HTMLDivElement>("toast");
  box.textContent = message;
  box.classList.add("visible");
  setTimeout(() => box.classList.remove("visible"), 3000);
}

export class App {
  private session: SliderSession | null = null;
  private sessionId: string | null = null;
  private sliders: HTMLInputElement[] = [];
  private readouts: HTMLSpanElement[] = [];

  async start(): Promise<void> {
    el<HTMLInputElement>("file-input").addEventListener("change", (ev) => {
      const input = ev.target as HTMLInputElement;
      if (input.files && input.files[0]) void this.open(input.files[0]);
    });
    el<HTMLButtonElement>("reset-btn").addEventListener("click", () => {
      this.session?.resetToPredicted();
    });
    el<HTMLButtonElement>("download-btn").addEventListener("click", () => {
      void this.download();
    });
    // rehydrate a session referenced in the URL hash
    const sid = window.location.hash.slice(1);
    if (sid) {
      try {
        this.attach(await getSession(sid, true));
      } catch {
        window.location.hash = "";
      }
    }
  }

  private async open(file: File): Promise<void> {
    try {
      const resp = await createSession(file);
      window.location.hash = resp.id;
      this.attach(resp);
    } catch (err) {
      const message =
        err && typeof err === "object" && "status" in err &&
        (err as { status: number }).status === 413
          ? "image too large (64 MB limit)"
          : "could not open image";
      toast(message);
    }
  }

  private attach(resp: SessionResponse): void {
    this.sessionId = resp.id;
    this.buildSliders(resp);
    this.session = new SliderSession(
      (strengths) => patchStrengths(resp.id, strengths, true),
      {
        onPreview: (result) => {
          showPreview(el<HTMLImageElement>("preview"), result.preview);
          if (result.intermediates) this.showIntermediates(result.intermediates);
        },
        onStrengths: (strengths) => this.reflect(strengths),
        onError: (message) => toast(message),
      },
      resp.strengths,
      resp.predicted_strengths,
    );
    showPreview(el<HTMLImageElement>("preview"), resp.preview);
    if (resp.intermediates) this.showIntermediates(resp.intermediates);
    this.reflect(resp.strengths);
    el<HTMLDivElement>("editor").classList.remove("hidden");
    el<HTMLSpanElement>("image-size").textContent =
      `${resp.width} x ${resp.height}`;
  }

  private buildSliders(resp: SessionResponse): void {
    const host = el<HTMLDivElement>("sliders");
    host.replaceChildren();
    this.sliders = [];
    this.readouts = [];
    const names = ["shadows", "brightness", "color"];
    for (let k = 0; k < resp.num_ops; k++) {
      const row = document.createElement("div");
      row.className = "slider-row";
      const label = document.createElement("label");
      label.textContent = `${k + 1}. ${names[k] ?? `operator ${k + 1}`}`;
      const slider = document.createElement("input");
      slider.type = "range";
      slider.min = String(SLIDER_MIN);
      slider.max = String(SLIDER_MAX);
      slider.step = String(SLIDER_STEP);
      slider.value = String(resp.strengths[k]);
      // tick at the predicted value
      const ticks = document.createElement("datalist");
      ticks.id = `ticks-${k}`;
      const tick = document.createElement("option");
      tick.value = String(resp.predicted_strengths[k]);
      ticks.appendChild(tick);
      slider.setAttribute("list", ticks.id);
      const readout = document.createElement("span");
      readout.className = "value";
      slider.addEventListener("input", () => {
        readout.textContent = Number(slider.value).toFixed(2);
        this.session?.setStrength(k, Number(slider.value));
      });
      row.append(label, slider, ticks, readout);
      host.appendChild(row);
      this.sliders.push(slider);
      this.readouts.push(readout);
    }
  }

  private reflect(strengths: number[]): void {
    strengths.forEach((v, k) => {
      if (this.sliders[k]) {
        this.sliders[k].value = String(v);
        this.readouts[k].textContent = v.toFixed(2);
      }
    });
  }

  private showIntermediates(blobs: string[]): void {
    const strip = el<HTMLDivElement>("intermediates");
    strip.replaceChildren();
    blobs.forEach((b64, k) => {
      const fig = document.createElement("figure");
      const img = document.createElement("img");
      showPreview(img, b64);
      const cap = document.createElement("figcaption");
      cap.textContent = `after op ${k + 1}`;
      fig.append(img, cap);
      strip.appendChild(fig);
    });
  }

  private async download(): Promise<void> {
    if (!this.sessionId) return;
    try {
      const blob = await fetchFullRender(this.sessionId);
      const url = URL.createObjectURL(blob);
      const a = document.createElement("a");
      a.href = url;
      a.download = "retouched.png";
      a.click();
      URL.revokeObjectURL(url);
    } catch {
      toast("full-resolution render failed");
    }
  }
}
