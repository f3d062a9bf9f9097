"""HTTP re-editing service behind the slider UI.

Each session caches the unclamped operator chain at preview resolution
and re-renders lazily from the lowest changed operator, so dragging the
last slider recomputes exactly one operator. Full-resolution renders are
recomputed from the original with the current strengths and byte-match
the CLI's output for the same inputs.

Endpoints:
    POST   /sessions                     multipart upload -> session
    GET    /sessions/{id}                strengths + preview
    PATCH  /sessions/{id}/strengths      re-render from lowest changed op
    GET    /sessions/{id}/full           full-resolution PNG
    DELETE /sessions/{id}
"""

from __future__ import annotations

import base64
import threading
import uuid
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request, Response, UploadFile
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from neurop.color import neurop_forward_image
from neurop.data import decode_image_bytes, encode_image
from neurop.pipeline import (
    RetouchModel,
    clamp01,
    downsample_long_edge,
    retouch,
    retouch_with_strengths,
)

MAX_UPLOAD_BYTES = 64 * 1024 * 1024
PREVIEW_LONG_EDGE = 512
STRENGTH_LIMIT = 2.0  # sliders may over-drive past the predictor range


class Session:
    def __init__(self, sid, original, model: RetouchModel, preview_edge):
        self.id = sid
        self.original = original
        self.model = model
        self.lock = threading.Lock()
        self.recomputed_ops_total = 0
        self.cache_hits_total = 0

        result = retouch(original, model)
        self.predicted_strengths = list(result.strengths)
        self.strengths = list(result.strengths)

        self.preview_base = downsample_long_edge(original, preview_edge)
        self.raws = []  # unclamped preview-resolution chain, one per operator
        self._rebuild(from_k=0)
        self.preview_png = self._encode_current()

    def _rebuild(self, from_k):
        current = self.preview_base if from_k == 0 else self.raws[from_k - 1]
        del self.raws[from_k:]
        for k in range(from_k, self.model.num_ops):
            current = neurop_forward_image(current, self.strengths[k],
                                           self.model.neurops[k])
            self.raws.append(current)
        return self.model.num_ops - from_k

    def _encode_current(self):
        return encode_image(clamp01(self.raws[-1]), ".png")

    def set_strengths(self, values):
        """Apply clamped strengths; recompute from the lowest changed
        operator. Returns the number of operator applications performed."""
        clamped = [float(np.clip(v, -STRENGTH_LIMIT, STRENGTH_LIMIT)) for v in values]
        changed = [k for k, (a, b) in enumerate(zip(self.strengths, clamped))
                   if a != b]
        if not changed:
            self.cache_hits_total += self.model.num_ops
            return 0
        lowest = changed[0]
        self.strengths = clamped
        recomputed = self._rebuild(from_k=lowest)
        self.recomputed_ops_total += recomputed
        self.cache_hits_total += lowest
        self.preview_png = self._encode_current()
        return recomputed

    def intermediate_pngs(self):
        return [encode_image(clamp01(raw), ".png") for raw in self.raws]


def _b64(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def create_app(model: RetouchModel, preview_edge=PREVIEW_LONG_EDGE,
               max_upload=MAX_UPLOAD_BYTES, static_dir=None) -> FastAPI:
    app = FastAPI(title="neurop re-editing service")
    sessions = {}
    registry_lock = threading.Lock()

    def get_session(sid) -> Session:
        with registry_lock:
            return sessions.get(sid)

    def session_payload(s: Session, recomputed, intermediates=False):
        body = {
            "id": s.id,
            "num_ops": s.model.num_ops,
            "strengths": s.strengths,
            "predicted_strengths": s.predicted_strengths,
            "preview": _b64(s.preview_png),
            "width": int(s.original.shape[1]),
            "height": int(s.original.shape[0]),
            "recomputed_ops": recomputed,
            "recomputed_ops_total": s.recomputed_ops_total,
            "cache_hits_total": s.cache_hits_total,
        }
        if intermediates:
            body["intermediates"] = [_b64(p) for p in s.intermediate_pngs()]
        return body

    @app.post("/sessions")
    async def create_session(file: UploadFile):
        data = await file.read()
        if len(data) > max_upload:
            return JSONResponse({"error": "upload too large"}, status_code=413)
        try:
            img = decode_image_bytes(data)
        except ValueError as exc:
            return JSONResponse({"error": str(exc)}, status_code=400)
        sid = uuid.uuid4().hex
        session = Session(sid, img, model, preview_edge)
        with registry_lock:
            sessions[sid] = session
        return JSONResponse(session_payload(session, session.model.num_ops))

    @app.get("/sessions/{sid}")
    def get_state(sid: str, intermediates: bool = False):
        s = get_session(sid)
        if s is None:
            return JSONResponse({"error": "unknown session"}, status_code=404)
        with s.lock:
            return JSONResponse(session_payload(s, 0, intermediates))

    @app.patch("/sessions/{sid}/strengths")
    async def patch_strengths(sid: str, request: Request,
                              intermediates: bool = False):
        s = get_session(sid)
        if s is None:
            return JSONResponse({"error": "unknown session"}, status_code=404)
        try:
            body = await request.json()
        except Exception:
            return JSONResponse({"error": "body must be JSON"}, status_code=400)
        values = body.get("strengths") if isinstance(body, dict) else body
        if (
            not isinstance(values, list)
            or len(values) != s.model.num_ops
            or not all(isinstance(v, (int, float)) and np.isfinite(v)
                       for v in values)
        ):
            return JSONResponse(
                {"error": f"strengths must be {s.model.num_ops} finite numbers",
                 "field": "strengths"},
                status_code=400,
            )
        with s.lock:
            recomputed = s.set_strengths(values)
            return JSONResponse(session_payload(s, recomputed, intermediates))

    @app.get("/sessions/{sid}/full")
    def full_render(sid: str):
        s = get_session(sid)
        if s is None:
            return JSONResponse({"error": "unknown session"}, status_code=404)
        with s.lock:
            out = retouch_with_strengths(s.original, s.model, s.strengths)
            return Response(encode_image(out, ".png"), media_type="image/png")

    @app.delete("/sessions/{sid}", status_code=204)
    def delete_session(sid: str):
        with registry_lock:
            if sessions.pop(sid, None) is None:
                return JSONResponse({"error": "unknown session"}, status_code=404)
        return Response(status_code=204)

    if static_dir is None:
        bundled = Path(__file__).resolve().parents[2] / "frontend" / "dist"
        static_dir = bundled if bundled.is_dir() else None
    if static_dir is not None:
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")
    return app
