"""Versioned model bundle: every fitted curve and threshold one file.

Schema ppc-bundle/1 is a single JSON document holding, per setting, the
time and eye-movement PC curves, the detectability curve, the
log-eccentricity curve family with its duration conditions, and the
precomputed channel thresholds, plus the grid geometry and the
satisfaction configuration they were derived under.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

from .ppc import DetectabilityPPC, ExponentialPPC, PCCurve, Setting
from .satisfaction import ChannelThresholds, SatisfactionConfig, thresholds_for
from .sdt import PriorWeights
from .surface import CurveFamily, GridGeometry, LogEccentricityCurve

BUNDLE_SCHEMA = "ppc-bundle/1"


class BundleFormatError(ValueError):
    pass


@dataclass(frozen=True)
class SettingModel:
    """All fitted pieces for one zoom/clutter/target condition."""

    time_curve: PCCurve
    eyemvmt_curve: PCCurve
    detect_ppc: DetectabilityPPC
    ecc_curves: tuple[LogEccentricityCurve, ...]
    thresholds: ChannelThresholds

    def __post_init__(self):
        if not self.ecc_curves:
            raise ValueError("setting model needs at least one eccentricity curve")


def build_setting_model(time_curve, eyemvmt_curve, detect_ppc, ecc_curves,
                        sat_cfg: SatisfactionConfig | None = None) -> SettingModel:
    """Assemble a SettingModel, precomputing its channel thresholds."""
    thr = thresholds_for(time_curve, eyemvmt_curve, detect_ppc, sat_cfg)
    return SettingModel(
        time_curve=time_curve,
        eyemvmt_curve=eyemvmt_curve,
        detect_ppc=detect_ppc,
        ecc_curves=tuple(ecc_curves),
        thresholds=thr,
    )


class ModelBundle:
    """Immutable container for per-setting models; lookups are total."""

    def __init__(self, models: dict, geometry: GridGeometry | None = None,
                 satisfaction: SatisfactionConfig | None = None):
        if not models:
            raise ValueError("bundle must declare at least one setting")
        self.geometry = geometry if geometry is not None else GridGeometry()
        self.satisfaction = satisfaction if satisfaction is not None else SatisfactionConfig()
        self.models = dict(models)
        self.family = CurveFamily(
            {setting: model.ecc_curves for setting, model in self.models.items()}
        )

    @property
    def settings(self) -> list[Setting]:
        return list(self.models)

    def model_for(self, setting: Setting) -> SettingModel:
        try:
            return self.models[setting]
        except KeyError:
            raise ValueError(f"setting {setting.key!r} not in bundle") from None

    def thresholds_for(self, setting: Setting) -> ChannelThresholds:
        return self.model_for(setting).thresholds

    # -- serialization ----------------------------------------------------

    def to_document(self) -> dict:
        return {
            "schema": BUNDLE_SCHEMA,
            "geometry": {
                "width_px": self.geometry.width_px,
                "height_px": self.geometry.height_px,
                "deg_per_px": self.geometry.deg_per_px,
            },
            "satisfaction": {
                "epsilon": self.satisfaction.epsilon,
                "eta": self.satisfaction.eta,
                "sigma_floor": self.satisfaction.sigma_floor,
            },
            "settings": {
                setting.key: _model_to_doc(model) for setting, model in self.models.items()
            },
        }

    def save(self, path) -> None:
        """Serialize to path atomically (temp file + rename)."""
        path = Path(path)
        text = json.dumps(self.to_document(), sort_keys=True, indent=2) + "\n"
        fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=path.name, suffix=".tmp")
        try:
            with os.fdopen(fd, "w") as fh:
                fh.write(text)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    @classmethod
    def from_document(cls, doc: dict) -> "ModelBundle":
        schema = doc.get("schema")
        if schema != BUNDLE_SCHEMA:
            raise BundleFormatError(
                f"unsupported bundle version {schema!r} (want {BUNDLE_SCHEMA})"
            )
        try:
            g = doc["geometry"]
            geometry = GridGeometry(g["width_px"], g["height_px"], g["deg_per_px"])
            s = doc["satisfaction"]
            sat = SatisfactionConfig(s["epsilon"], s["eta"], s["sigma_floor"])
            models = {}
            for key, mdoc in doc["settings"].items():
                setting = Setting.from_key(key)
                models[setting] = _model_from_doc(mdoc, setting)
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, BundleFormatError):
                raise
            raise BundleFormatError(f"malformed bundle: {exc}") from exc
        return cls(models, geometry=geometry, satisfaction=sat)

    @classmethod
    def load(cls, path) -> "ModelBundle":
        with open(path) as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise BundleFormatError(f"bundle is not valid JSON: {exc.msg}") from exc
        return cls.from_document(doc)


def _pc_curve_to_doc(curve: PCCurve) -> dict:
    dp = curve.dprime_curve
    return {
        "alpha": dp.alpha,
        "beta": dp.beta,
        "metric_kind": dp.metric_kind,
        "saturated": dp.saturated,
        "lambda": curve.lambda_,
        "m": curve.weights.m,
        "sigma_knots_x": list(curve.sigma_knots_x),
        "sigma_knots_y": list(curve.sigma_knots_y),
        "sigma_floor": curve.sigma_floor,
    }


def _pc_curve_from_doc(doc: dict, setting: Setting) -> PCCurve:
    dp = ExponentialPPC(
        alpha=doc["alpha"],
        beta=doc["beta"],
        metric_kind=doc["metric_kind"],
        setting=setting,
        saturated=doc["saturated"],
    )
    return PCCurve(
        dprime_curve=dp,
        lambda_=doc["lambda"],
        weights=PriorWeights(doc["m"]),
        sigma_knots_x=tuple(doc["sigma_knots_x"]),
        sigma_knots_y=tuple(doc["sigma_knots_y"]),
        sigma_floor=doc["sigma_floor"],
    )


def _model_to_doc(model: SettingModel) -> dict:
    det = model.detect_ppc
    thr = model.thresholds
    if not all(math.isfinite(v) for v in (thr.t_star_ms, thr.e_star, thr.d_star)):
        raise BundleFormatError("thresholds must be finite")
    return {
        "time": _pc_curve_to_doc(model.time_curve),
        "eye_movements": _pc_curve_to_doc(model.eyemvmt_curve),
        "detectability": {
            "pc_inf": det.pc_inf,
            "gamma": det.gamma,
            "ceiling_clamped": det.ceiling_clamped,
            "sigma_knots_x": list(det.sigma_knots_x),
            "sigma_knots_y": list(det.sigma_knots_y),
            "sigma_floor": det.sigma_floor,
        },
        "eccentricity": [
            {"alpha_e": c.alpha_e, "beta_e": c.beta_e, "time_condition_ms": c.time_condition_ms}
            for c in model.ecc_curves
        ],
        "thresholds": {
            "t_star_ms": thr.t_star_ms,
            "e_star": thr.e_star,
            "d_star": thr.d_star,
        },
    }


def _model_from_doc(doc: dict, setting: Setting) -> SettingModel:
    det = doc["detectability"]
    thr = doc["thresholds"]
    return SettingModel(
        time_curve=_pc_curve_from_doc(doc["time"], setting),
        eyemvmt_curve=_pc_curve_from_doc(doc["eye_movements"], setting),
        detect_ppc=DetectabilityPPC(
            pc_inf=det["pc_inf"],
            gamma=det["gamma"],
            setting=setting,
            ceiling_clamped=det["ceiling_clamped"],
            sigma_knots_x=tuple(det["sigma_knots_x"]),
            sigma_knots_y=tuple(det["sigma_knots_y"]),
            sigma_floor=det["sigma_floor"],
        ),
        ecc_curves=tuple(
            LogEccentricityCurve(c["alpha_e"], c["beta_e"], c["time_condition_ms"])
            for c in doc["eccentricity"]
        ),
        thresholds=ChannelThresholds(
            t_star_ms=thr["t_star_ms"], e_star=thr["e_star"], d_star=thr["d_star"]
        ),
    )
