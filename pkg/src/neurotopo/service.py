"""HTTP facade for the interactive synapse-range tuning workflow.

One session holds the uploaded red/green channels, the traced dendrite ROI
and the last preview parameters. Previews return the marked mask as
run-length spans so a browser can repaint the overlay on every slider move;
the full-color overlay image is rendered only on finalize. Counts are
computed by exactly the same pipeline as the batch CLI, so the two surfaces
can never disagree.

Wire format (all JSON):
  POST /sessions                multipart: red, green files (PGM), optional
                                calib field (microns per pixel)
                                -> 201 {"id": ...}
  POST /sessions/{id}/roi       {"vertices": [[x, y], ...], "band_width": w}
                                -> {"vertices": ..., "band_width": ...,
                                    "lengthUm": ... | null}
  GET  /sessions/{id}/preview?redLo=&redHi=&greenLo=&greenHi=
                                -> {"count": n, "densityPer100Um": d | null,
                                    "dendriteLengthUm": l | null,
                                    "spans": [[y, x0, len], ...],
                                    "params": {...}}
  POST /sessions/{id}/finalize  -> preview payload + artifact paths
  GET  /health                  -> {"status": "ok"}
Errors: {"code": ..., "message": ...} with 400/404/409/422.
"""

from __future__ import annotations

import json
import secrets
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Tuple

import numpy as np
from fastapi import FastAPI, File, Form, UploadFile
from fastapi.responses import JSONResponse

from .images import BinaryImage, GrayImage
from .pipelines import RoiPolyline, count_synapses, rasterize_roi_band
from .pnm import ImageFormatError, load_image

DEFAULT_PARAMS = (0, 255, 0, 255)  # redLo, redHi, greenLo, greenHi


@dataclass
class Session:
    id: str
    red: GrayImage
    green: GrayImage
    calibration: Optional[float]
    roi: Optional[RoiPolyline] = None
    roi_band: Optional[BinaryImage] = None
    last_params: Tuple[int, int, int, int] = DEFAULT_PARAMS
    created_at: float = field(default_factory=time.time)
    last_access: float = field(default_factory=time.time)
    lock: threading.Lock = field(default_factory=threading.Lock)


class SessionStore:
    def __init__(self, idle_timeout: float):
        self.idle_timeout = idle_timeout
        self._sessions: Dict[str, Session] = {}
        self._lock = threading.Lock()

    def create(self, session: Session) -> None:
        with self._lock:
            self._sessions[session.id] = session

    def get(self, session_id: str) -> Optional[Session]:
        now = time.time()
        with self._lock:
            session = self._sessions.get(session_id)
            if session is None:
                return None
            if now - session.last_access > self.idle_timeout:
                del self._sessions[session_id]
                return None
            session.last_access = now
            return session


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"code": code, "message": message})


def _decode_upload(data: bytes, what: str) -> GrayImage:
    import tempfile

    # the PNM readers work on paths; parse from a byte buffer via a spooled file
    with tempfile.NamedTemporaryFile(suffix=".pnm") as tmp:
        tmp.write(data)
        tmp.flush()
        img = load_image(tmp.name)
    if isinstance(img, GrayImage):
        return img
    if what in img:
        return img[what]
    raise ImageFormatError(f"{what} upload is multi-channel without a {what} channel", 0)


def mask_to_spans(mask: np.ndarray):
    """Run-length encode a boolean mask as [row, start_col, length] triples."""
    spans = []
    h, w = mask.shape
    padded = np.zeros((h, w + 2), dtype=bool)
    padded[:, 1:-1] = mask
    diff = np.diff(padded.astype(np.int8), axis=1)
    for y in range(h):
        starts = np.nonzero(diff[y] == 1)[0]
        ends = np.nonzero(diff[y] == -1)[0]
        for s, e in zip(starts.tolist(), ends.tolist()):
            spans.append([y, s, e - s])
    return spans


def create_app(report_dir=None, idle_timeout: float = 3600.0) -> FastAPI:
    app = FastAPI(title="neurotopo preview service")
    store = SessionStore(idle_timeout)
    out_dir = Path(report_dir) if report_dir else Path("neurotopo-sessions")
    app.state.store = store
    app.state.report_dir = out_dir

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.post("/sessions", status_code=201)
    async def create_session(
        red: UploadFile = File(...),
        green: UploadFile = File(...),
        calib: Optional[float] = Form(default=None),
    ):
        try:
            red_img = _decode_upload(await red.read(), "red")
            green_img = _decode_upload(await green.read(), "green")
        except ImageFormatError as exc:
            return _error(400, "parse-error", str(exc))
        if (red_img.width, red_img.height) != (green_img.width, green_img.height):
            return _error(400, "dimension-mismatch", "red and green channels must share dimensions")
        if calib is not None and calib <= 0:
            return _error(400, "bad-calibration", "calib must be positive")
        session = Session(id=secrets.token_hex(16), red=red_img, green=green_img, calibration=calib)
        store.create(session)
        return {"id": session.id}

    @app.post("/sessions/{session_id}/roi")
    def set_roi(session_id: str, payload: dict):
        session = store.get(session_id)
        if session is None:
            return _error(404, "unknown-session", f"no session {session_id}")
        try:
            vertices = tuple((float(v[0]), float(v[1])) for v in payload["vertices"])
            roi = RoiPolyline(vertices, float(payload.get("band_width", 4.0)))
        except (KeyError, TypeError, IndexError, ValueError) as exc:
            return _error(422, "bad-roi", f"invalid ROI payload: {exc}")
        with session.lock:
            session.roi = roi
            session.roi_band = rasterize_roi_band(roi, session.red.width, session.red.height)
        length = roi.length_microns(session.calibration) if session.calibration else None
        return {
            "vertices": [[x, y] for x, y in roi.vertices],
            "band_width": roi.band_width,
            "lengthUm": length,
        }

    def _compute(session: Session, params) -> dict:
        red_lo, red_hi, green_lo, green_hi = params
        report = count_synapses(
            session.red,
            session.green,
            session.roi,
            (red_lo, red_hi),
            (green_lo, green_hi),
            session.calibration,
            roi_band=session.roi_band,
        )
        mask = report.marked_mask.mask
        return {
            "count": report.count,
            "densityPer100Um": report.density_per_100um,
            "dendriteLengthUm": report.dendrite_length_um,
            "spans": mask_to_spans(mask),
            "params": {"redLo": red_lo, "redHi": red_hi, "greenLo": green_lo, "greenHi": green_hi},
        }

    @app.get("/sessions/{session_id}/preview")
    def preview(session_id: str, redLo: int = 0, redHi: int = 255, greenLo: int = 0, greenHi: int = 255):
        session = store.get(session_id)
        if session is None:
            return _error(404, "unknown-session", f"no session {session_id}")
        params = (redLo, redHi, greenLo, greenHi)
        for lo, hi in ((redLo, redHi), (greenLo, greenHi)):
            if not (0 <= lo <= hi <= 255):
                return _error(422, "bad-range", f"need 0 <= lo <= hi <= 255, got {lo}:{hi}")
        with session.lock:
            session.last_params = params
        return _compute(session, params)

    @app.post("/sessions/{session_id}/finalize")
    def finalize(session_id: str):
        session = store.get(session_id)
        if session is None:
            return _error(404, "unknown-session", f"no session {session_id}")
        if session.roi is None:
            return _error(409, "roi-missing", "trace an ROI before finalizing")
        with session.lock:
            params = session.last_params
            payload = _compute(session, params)
            out_dir = app.state.report_dir
            out_dir.mkdir(parents=True, exist_ok=True)
            report_path = out_dir / f"{session.id}.json"
            image_path = out_dir / f"{session.id}.png"
            report_path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")
            _write_overlay(session, payload["spans"], image_path)
        payload["reportPath"] = str(report_path)
        payload["imagePath"] = str(image_path)
        return payload

    return app


def _write_overlay(session: Session, spans, path: Path) -> None:
    from PIL import Image

    h, w = session.red.pixels.shape
    rgb = np.zeros((h, w, 3), dtype=np.uint8)
    rgb[:, :, 0] = session.red.pixels
    rgb[:, :, 1] = session.green.pixels
    if session.roi_band is not None:
        rgb[:, :, 2] = np.where(session.roi_band.mask, 255, 0)
    for y, x0, length in spans:
        rgb[y, x0 : x0 + length, :] = 255
    Image.fromarray(rgb, "RGB").save(path)


app = create_app()
