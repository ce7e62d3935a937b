"""Plain-text model files and key=value run configuration files.

Model file, format version 1::

    pidnet-model 1
    input_width 8
    layer dense 64 elu
    layer dropout 0.25
    ...
    fingerprint seed=1 epochs=500 optimizer=adadelta rho=0.95 epsilon=1e-06 ...
    weights 0 64 8
    <one line per row, 17 significant digits, space separated>
    bias 0 64
    <one line>
    ...
    end

Every float is written with 17 significant digits, which round-trips
float64 exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ParameterError, ParseError
from .network import Activation, Dense, Dropout, ModelParams, NetworkSpec, default_spec
from .optim import AdadeltaConfig, SgdConfig
from .trainer import FixedUniform, GlorotUniform, TrainConfig

FORMAT_VERSION = 1
MAGIC = "pidnet-model"


class VersionError(ParseError):
    pass


def fmt17(x: float) -> str:
    return format(float(x), ".17g")


# --- network spec as text -------------------------------------------------


def layer_to_text(layer) -> str:
    if isinstance(layer, Dense):
        return f"dense:{layer.width}:{layer.activation}"
    return f"dropout:{layer.rate!r}"


def layer_from_text(text: str):
    parts = [p.strip() for p in text.strip().split(":")]
    try:
        if parts[0] == "dense" and len(parts) == 3:
            return Dense(int(parts[1]), Activation.parse(parts[2]))
        if parts[0] == "dropout" and len(parts) == 2:
            return Dropout(float(parts[1]))
    except ValueError as exc:
        raise ParameterError(f"bad layer descriptor {text!r}: {exc}") from None
    raise ParameterError(
        f"bad layer descriptor {text!r}; expected dense:<width>:<activation> or dropout:<rate>"
    )


def spec_to_text(spec: NetworkSpec) -> str:
    return ", ".join(layer_to_text(l) for l in spec.layers)


def spec_from_text(text: str, input_width: int = 8) -> NetworkSpec:
    layers = [layer_from_text(t) for t in text.split(",") if t.strip()]
    return NetworkSpec(input_width, tuple(layers))


# --- run configuration ----------------------------------------------------

CONFIG_KEYS = (
    "input_width",
    "layers",
    "epochs",
    "batch_size",
    "optimizer",
    "rho",
    "epsilon",
    "learning_rate",
    "init",
    "init_lo",
    "init_hi",
    "seed",
    "validation_fraction",
    "classification_threshold",
    "stratified",
)


def config_to_dict(config: TrainConfig) -> dict[str, str]:
    d = {
        "input_width": str(config.spec.input_width),
        "layers": spec_to_text(config.spec),
        "epochs": str(config.epochs),
        "batch_size": str(config.batch_size),
        "optimizer": config.optimizer.name,
    }
    if isinstance(config.optimizer, AdadeltaConfig):
        d["rho"] = repr(config.optimizer.rho)
        d["epsilon"] = repr(config.optimizer.epsilon)
    else:
        d["learning_rate"] = repr(config.optimizer.learning_rate)
    d["init"] = config.init.name
    if isinstance(config.init, FixedUniform):
        d["init_lo"] = repr(config.init.lo)
        d["init_hi"] = repr(config.init.hi)
    d["seed"] = str(config.seed)
    d["validation_fraction"] = repr(config.validation_fraction)
    d["classification_threshold"] = repr(config.classification_threshold)
    d["stratified"] = "true" if config.stratified else "false"
    return d


def _parse_bool(key: str, text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ParameterError(f"{key}: expected true/false, got {text!r}")


def _num(key: str, text: str, kind=float):
    try:
        return kind(text)
    except ValueError:
        raise ParameterError(f"{key}: expected {kind.__name__}, got {text!r}") from None


def config_from_dict(values: dict[str, str], base: TrainConfig | None = None) -> TrainConfig:
    """Build a config from string values layered over ``base`` (defaults if None)."""
    unknown = sorted(set(values) - set(CONFIG_KEYS))
    if unknown:
        raise ParameterError(f"unknown config key {unknown[0]!r}")
    base = base or TrainConfig()
    v = config_to_dict(base)
    # fill optimizer/init constants for whichever variant ends up selected
    v.setdefault("rho", repr(AdadeltaConfig().rho))
    v.setdefault("epsilon", repr(AdadeltaConfig().epsilon))
    v.setdefault("learning_rate", repr(SgdConfig().learning_rate))
    v.setdefault("init_lo", repr(FixedUniform().lo))
    v.setdefault("init_hi", repr(FixedUniform().hi))
    v.update(values)

    spec = spec_from_text(v["layers"], _num("input_width", v["input_width"], int))
    opt_name = v["optimizer"].strip().lower()
    if opt_name == "adadelta":
        optimizer = AdadeltaConfig(_num("rho", v["rho"]), _num("epsilon", v["epsilon"]))
    elif opt_name == "sgd":
        optimizer = SgdConfig(_num("learning_rate", v["learning_rate"]))
    else:
        raise ParameterError(f"optimizer: expected adadelta or sgd, got {v['optimizer']!r}")
    init_name = v["init"].strip().lower()
    if init_name == "glorot":
        init = GlorotUniform()
    elif init_name == "fixed":
        init = FixedUniform(_num("init_lo", v["init_lo"]), _num("init_hi", v["init_hi"]))
    else:
        raise ParameterError(f"init: expected glorot or fixed, got {v['init']!r}")
    config = TrainConfig(
        spec=spec,
        epochs=_num("epochs", v["epochs"], int),
        batch_size=_num("batch_size", v["batch_size"], int),
        optimizer=optimizer,
        init=init,
        seed=_num("seed", v["seed"], int),
        validation_fraction=_num("validation_fraction", v["validation_fraction"]),
        classification_threshold=_num(
            "classification_threshold", v["classification_threshold"]
        ),
        stratified=_parse_bool("stratified", v["stratified"]),
    )
    config.validate()
    return config


def render_config(config: TrainConfig) -> str:
    lines = ["# pidnet run configuration"]
    lines += [f"{k} = {val}" for k, val in config_to_dict(config).items()]
    return "\n".join(lines) + "\n"


def parse_config_values(text: str, source: str = "<config>") -> dict[str, str]:
    """Read ``key = value`` lines; ``#`` starts a comment line."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ParseError(f"{source}: expected key = value", lineno)
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise ParseError(f"{source}: unknown config key {key!r}", lineno)
        if key in values:
            raise ParseError(f"{source}: duplicate key {key!r}", lineno)
        values[key] = val
    return values


def parse_config(text: str, source: str = "<config>") -> TrainConfig:
    return config_from_dict(parse_config_values(text, source))


def load_config(path) -> TrainConfig:
    path = Path(path)
    return parse_config(path.read_text(encoding="utf-8"), str(path))


def save_config(config: TrainConfig, path) -> None:
    Path(path).write_text(render_config(config), encoding="utf-8")


# --- model files ----------------------------------------------------------


@dataclass
class ModelFile:
    spec: NetworkSpec
    params: ModelParams
    fingerprint: dict[str, str] = field(default_factory=dict)
    format_version: int = FORMAT_VERSION

    @classmethod
    def from_training(cls, config: TrainConfig, params: ModelParams) -> "ModelFile":
        fp = config_to_dict(config)
        del fp["layers"], fp["input_width"]
        return cls(config.spec, params, fp)

    def train_config(self) -> TrainConfig:
        """Training configuration recorded in the fingerprint."""
        values = dict(self.fingerprint)
        values["layers"] = spec_to_text(self.spec)
        values["input_width"] = str(self.spec.input_width)
        return config_from_dict(values)


def render_model(model: ModelFile) -> str:
    model.params.check(model.spec)
    lines = [f"{MAGIC} {model.format_version}", f"input_width {model.spec.input_width}"]
    for layer in model.spec.layers:
        if isinstance(layer, Dense):
            lines.append(f"layer dense {layer.width} {layer.activation}")
        else:
            lines.append(f"layer dropout {layer.rate!r}")
    for key, val in model.fingerprint.items():
        if any(c.isspace() for c in key + val) or "=" in key:
            raise ParameterError(f"fingerprint entry {key}={val!r} contains whitespace or '='")
    lines.append(
        "fingerprint " + " ".join(f"{k}={v}" for k, v in model.fingerprint.items())
    )
    for i, (w, b) in enumerate(zip(model.params.weights, model.params.biases)):
        lines.append(f"weights {i} {w.shape[0]} {w.shape[1]}")
        lines.extend(" ".join(fmt17(x) for x in row) for row in w)
        lines.append(f"bias {i} {b.shape[0]}")
        lines.append(" ".join(fmt17(x) for x in b))
    lines.append("end")
    return "\n".join(lines) + "\n"


class _Lines:
    def __init__(self, text: str, source: str):
        self.lines = text.splitlines()
        self.pos = 0
        self.source = source

    def next(self, what: str) -> list[str]:
        while self.pos < len(self.lines):
            self.pos += 1
            toks = self.lines[self.pos - 1].split()
            if toks:
                return toks
        raise self.error(f"unexpected end of file, expected {what}")

    def error(self, message: str, cls=ParseError) -> ParseError:
        return cls(f"{self.source}: {message}", line=self.pos or None)

    def floats(self, toks: list[str], n: int, what: str) -> np.ndarray:
        if len(toks) != n:
            raise self.error(f"{what}: expected {n} values, found {len(toks)}")
        try:
            return np.array([float(t) for t in toks], dtype=np.float64)
        except ValueError:
            raise self.error(f"{what}: non-numeric value") from None


def parse_model(text: str, source: str = "<model>") -> ModelFile:
    rd = _Lines(text, source)
    head = rd.next("header")
    if len(head) != 2 or head[0] != MAGIC:
        raise rd.error(f"not a model file (expected '{MAGIC} <version>' header)")
    try:
        version = int(head[1])
    except ValueError:
        raise rd.error(f"bad format version {head[1]!r}") from None
    if version != FORMAT_VERSION:
        raise rd.error(
            f"unsupported model format version {version} (this reader supports {FORMAT_VERSION})",
            VersionError,
        )

    toks = rd.next("input_width")
    if len(toks) != 2 or toks[0] != "input_width":
        raise rd.error("expected 'input_width <n>'")
    try:
        input_width = int(toks[1])
    except ValueError:
        raise rd.error(f"bad input width {toks[1]!r}") from None

    layers = []
    fingerprint: dict[str, str] = {}
    while True:
        toks = rd.next("layer or fingerprint")
        try:
            if toks[0] == "layer" and len(toks) == 4 and toks[1] == "dense":
                layers.append(Dense(int(toks[2]), Activation.parse(toks[3])))
            elif toks[0] == "layer" and len(toks) == 3 and toks[1] == "dropout":
                layers.append(Dropout(float(toks[2])))
            elif toks[0] == "fingerprint":
                for item in toks[1:]:
                    if "=" not in item:
                        raise rd.error(f"bad fingerprint entry {item!r}")
                    k, v = item.split("=", 1)
                    fingerprint[k] = v
                break
            else:
                raise rd.error(f"unexpected record {toks[0]!r}")
        except ValueError as exc:
            if isinstance(exc, ParseError):
                raise
            raise rd.error(f"bad layer record: {exc}") from None
    try:
        spec = NetworkSpec(input_width, tuple(layers))
    except ParameterError as exc:
        raise rd.error(f"invalid network: {exc}") from None

    weights, biases = [], []
    for i, (rows, cols) in enumerate(spec.dense_shapes()):
        toks = rd.next(f"weights {i}")
        if toks != ["weights", str(i), str(rows), str(cols)]:
            raise rd.error(f"expected 'weights {i} {rows} {cols}', found {' '.join(toks)!r}")
        w = np.empty((rows, cols), dtype=np.float64)
        for r in range(rows):
            w[r] = rd.floats(rd.next(f"weights {i} row {r}"), cols, f"weights {i} row {r}")
        toks = rd.next(f"bias {i}")
        if toks != ["bias", str(i), str(rows)]:
            raise rd.error(f"expected 'bias {i} {rows}', found {' '.join(toks)!r}")
        b = rd.floats(rd.next(f"bias {i} values"), rows, f"bias {i}")
        weights.append(w)
        biases.append(b)
    if rd.next("end") != ["end"]:
        raise rd.error("expected 'end'")
    return ModelFile(spec, ModelParams(weights, biases), fingerprint, version)


def save_model(model: ModelFile, path) -> None:
    Path(path).write_text(render_model(model), encoding="utf-8")


def load_model(path) -> ModelFile:
    path = Path(path)
    return parse_model(path.read_text(encoding="utf-8"), str(path))


def zero_model(spec: NetworkSpec | None = None) -> ModelFile:
    """All-zero weights and biases; every input scores softplus(0)."""
    spec = spec or default_spec()
    return ModelFile(spec, ModelParams.zeros(spec), {})


__all__ = [
    "FORMAT_VERSION",
    "ModelFile",
    "VersionError",
    "config_from_dict",
    "config_to_dict",
    "load_config",
    "load_model",
    "parse_config",
    "parse_model",
    "render_config",
    "render_model",
    "save_config",
    "save_model",
    "spec_from_text",
    "spec_to_text",
    "zero_model",
]
