"""Run configuration: an INI-style file with a fixed schema.

Every key is listed in ``SCHEMA`` with its type and default.  Unknown
sections or keys, unparsable values and physically inadmissible values
raise ``ConfigError`` naming the key and, when known, the line.

Sections and keys
-----------------
[geometry]   kind (flat), nx, nz, length, n_shell, n_fourier, n_poly
[shell]      eps0, lame_lambda, lame_mu, rho_s, eps_damp
[fluid]      model (newtonian | pstructure_additive | pstructure_quadratic),
             sigma_visc, mu0, delta, p
[coupling]   eps_reg, dt, t_max, theta_contact, tol_eta, tol_u, max_outer,
             omega_relax, window_steps
[initial]    eta0_amplitude, eta0_shape, eta0_wavenumber,
             eta1_amplitude, eta1_shape, eta1_wavenumber, noise
[forcing.f]  kind, amplitude, wavenumber, speed, t0, width, component, shape
[forcing.g]  same keys as forcing.f
[output]     dir, checkpoint_every, dump_format (ascii | binary), plots
[run]        seed, deterministic
"""

import configparser
import math
import re
from dataclasses import dataclass, field, replace

from .errors import ConfigError

_BOOL = {"1": True, "true": True, "yes": True, "on": True, "0": False, "false": False, "no": False, "off": False}


def _bool(text):
    try:
        return _BOOL[text.strip().lower()]
    except KeyError:
        raise ValueError(f"not a boolean: {text!r}") from None


def _float(text):
    t = text.strip().lower().replace(" ", "")
    if t in ("2pi", "2*pi"):
        return 2.0 * math.pi
    if t == "pi":
        return math.pi
    return float(t)


_FORCING = {
    "kind": (str, "zero"),
    "amplitude": (_float, 0.0),
    "wavenumber": (int, 1),
    "speed": (_float, 0.0),
    "t0": (_float, 0.0),
    "width": (_float, 1.0),
    "component": (str, "z"),
    "shape": (str, "cos"),
}

SCHEMA = {
    "geometry": {
        "kind": (str, "flat"),
        "nx": (int, 64),
        "nz": (int, 32),
        "length": (_float, 2.0 * math.pi),
        "n_shell": (int, 4),
        "n_fourier": (int, 4),
        "n_poly": (int, 4),
    },
    "shell": {
        "eps0": (_float, 1.0),
        "lame_lambda": (_float, 1.0),
        "lame_mu": (_float, 1.0),
        "rho_s": (_float, 1.0),
        "eps_damp": (_float, 0.0),
    },
    "fluid": {
        "model": (str, "newtonian"),
        "sigma_visc": (_float, 1.0),
        "mu0": (_float, 1.0),
        "delta": (_float, 0.0),
        "p": (_float, 2.0),
    },
    "coupling": {
        "eps_reg": (_float, 1e-4),
        "dt": (_float, 1e-3),
        "t_max": (_float, 1.0),
        "theta_contact": (_float, 0.95),
        "tol_eta": (_float, 1e-8),
        "tol_u": (_float, 1e-8),
        "max_outer": (int, 30),
        "omega_relax": (_float, 1.0),
        "window_steps": (int, 10),
    },
    "initial": {
        "eta0_amplitude": (_float, 0.0),
        "eta0_shape": (str, "cos"),
        "eta0_wavenumber": (int, 1),
        "eta1_amplitude": (_float, 0.0),
        "eta1_shape": (str, "bump"),
        "eta1_wavenumber": (int, 4),
        "noise": (_float, 0.0),
    },
    "forcing.f": dict(_FORCING),
    "forcing.g": dict(_FORCING),
    "output": {
        "dir": (str, "out"),
        "checkpoint_every": (int, 0),
        "dump_format": (str, "binary"),
        "plots": (_bool, False),
    },
    "run": {
        "seed": (int, 0),
        "deterministic": (_bool, False),
    },
}


@dataclass
class SimConfig:
    """Parsed settings, one dict per section."""

    sections: dict = field(default_factory=dict)
    source: str = None

    def __getitem__(self, name):
        return self.sections[name]

    def get(self, section, key):
        return self.sections[section][key]

    def with_value(self, section, key, value):
        """Copy with one key replaced and revalidated."""
        sec = {s: dict(v) for s, v in self.sections.items()}
        if section not in sec or key not in sec[section]:
            raise ConfigError("unknown key", key=f"{section}.{key}")
        conv = SCHEMA[section][key][0]
        sec[section][key] = conv(value) if isinstance(value, str) else value
        cfg = replace(self, sections=sec)
        validate(cfg)
        return cfg

    def to_dict(self):
        return {s: dict(v) for s, v in self.sections.items()}

    def to_ini(self):
        lines = []
        for s, vals in self.sections.items():
            lines.append(f"[{s}]")
            lines.extend(f"{k} = {v!r}" if isinstance(v, float) else f"{k} = {v}" for k, v in vals.items())
            lines.append("")
        return "\n".join(lines)


def defaults():
    return SimConfig({s: {k: d for k, (_, d) in keys.items()} for s, keys in SCHEMA.items()})


def _line_index(text):
    """(section, key) -> 1-based line number, plus section -> line."""
    idx, section = {}, None
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        m = re.match(r"\[(.+)\]$", line)
        if m:
            section = m.group(1).strip()
            idx.setdefault((section, None), n)
            continue
        m = re.match(r"([^=:]+?)\s*[=:]", line)
        if m and section is not None:
            idx.setdefault((section, m.group(1).strip().lower()), n)
    return idx


def parse(text, source=None):
    parser = configparser.ConfigParser(interpolation=None, strict=True, default_section="__none__")
    try:
        parser.read_string(text, source=source or "<config>")
    except configparser.DuplicateOptionError as exc:
        raise ConfigError("duplicate key", key=f"{exc.section}.{exc.option}", line=exc.lineno) from None
    except configparser.DuplicateSectionError as exc:
        raise ConfigError("duplicate section", key=exc.section, line=exc.lineno) from None
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("key outside any section", line=exc.lineno) from None
    except configparser.ParsingError as exc:
        line = exc.errors[0][0] if exc.errors else None
        raise ConfigError("unparsable line", line=line) from None
    lines = _line_index(text)
    cfg = defaults()
    cfg.source = source
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError("unknown section", key=section, line=lines.get((section, None)))
        for key, raw in parser.items(section):
            where = dict(key=f"{section}.{key}", line=lines.get((section, key)))
            if key not in SCHEMA[section]:
                raise ConfigError("unknown key", **where)
            conv = SCHEMA[section][key][0]
            try:
                cfg.sections[section][key] = conv(raw)
            except (TypeError, ValueError):
                raise ConfigError(f"bad value {raw!r}", **where) from None
    validate(cfg, lines)
    return cfg


def load(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", key=str(path)) from None
    return parse(text, source=str(path))


def validate(cfg, lines=None):
    lines = lines or {}

    def fail(msg, section, key):
        raise ConfigError(msg, key=f"{section}.{key}", line=lines.get((section, key)))

    def positive(section, *keys):
        for k in keys:
            if not cfg.get(section, k) > 0:
                fail("must be positive", section, k)

    g = cfg["geometry"]
    if g["kind"] != "flat":
        fail("coupled runs support only the flat periodic channel", "geometry", "kind")
    positive("geometry", "length")
    for k in ("nx", "nz"):
        if g[k] < 8 or g[k] % 2:
            fail("must be an even integer >= 8", "geometry", k)
    for k in ("n_shell", "n_fourier", "n_poly"):
        if g[k] < 0:
            fail("must be nonnegative", "geometry", k)
    if g["n_shell"] < 1:
        fail("at least one shell mode is needed", "geometry", "n_shell")
    if 2 * g["n_shell"] + 1 > g["nx"] // 2:
        fail("too many shell modes for nx", "geometry", "n_shell")

    positive("shell", "eps0", "lame_mu", "rho_s")
    if cfg.get("shell", "lame_lambda") < 0:
        fail("must be nonnegative", "shell", "lame_lambda")
    if cfg.get("shell", "eps_damp") < 0:
        fail("must be nonnegative", "shell", "eps_damp")

    f = cfg["fluid"]
    if f["model"] not in ("newtonian", "pstructure_additive", "pstructure_quadratic"):
        fail(f"unknown model {f['model']!r}", "fluid", "model")
    positive("fluid", "sigma_visc", "mu0")
    if f["delta"] < 0:
        fail("must be nonnegative", "fluid", "delta")
    if not f["p"] > 1:
        fail("must exceed 1", "fluid", "p")

    c = cfg["coupling"]
    positive("coupling", "eps_reg", "dt", "t_max", "tol_eta", "tol_u")
    if not 0 < c["theta_contact"] < 1:
        fail("must lie in (0, 1)", "coupling", "theta_contact")
    if not 0 < c["omega_relax"] <= 1:
        fail("must lie in (0, 1]", "coupling", "omega_relax")
    for k in ("max_outer", "window_steps"):
        if c[k] < 1:
            fail("must be >= 1", "coupling", k)

    ini = cfg["initial"]
    for k in ("eta0_shape", "eta1_shape"):
        if ini[k] not in ("cos", "bump", "zero"):
            fail(f"unknown shape {ini[k]!r}", "initial", k)
    if ini["noise"] < 0:
        fail("must be nonnegative", "initial", "noise")
    if abs(ini["eta0_amplitude"]) * (2.0 if ini["eta0_shape"] == "bump" else 1.0) >= c["theta_contact"]:
        fail("initial displacement exceeds the contact threshold", "initial", "eta0_amplitude")

    for s in ("forcing.f", "forcing.g"):
        fc = cfg[s]
        if fc["kind"] not in ("zero", "constant", "pulse", "wave"):
            fail(f"unknown kind {fc['kind']!r}", s, "kind")
        if fc["shape"] not in ("cos", "bump"):
            fail(f"unknown shape {fc['shape']!r}", s, "shape")
        if fc["component"] not in ("x", "z"):
            fail("must be 'x' or 'z'", s, "component")
        if not fc["width"] > 0:
            fail("must be positive", s, "width")

    o = cfg["output"]
    if o["dump_format"] not in ("ascii", "binary"):
        fail("must be 'ascii' or 'binary'", "output", "dump_format")
    if o["checkpoint_every"] < 0:
        fail("must be nonnegative", "output", "checkpoint_every")
    return cfg
