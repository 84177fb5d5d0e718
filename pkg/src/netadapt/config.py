"""Scenario configuration files.

A config is flat INI text with explicit keys. Numbers are plain decimals with
optional exponent (``0.046875``, ``1e-4``); lists are separated by spaces or
commas, and per-agent matrices by ``;``.

.. code-block:: ini

    [scenario]
    name = my_run
    library = two_node        # optional: topology and ensemble from the library
    library_seed = 2015

    [topology]                # either a file ...
    file = graph.txt          # path relative to the config file
    # ... or inline edges (1-based node ids)
    nodes = 3
    edges = 1-2 1-3 2-3

    [ensemble]
    dim = 3
    truth = 0.5 0.5 0.7071
    covariances = 1 0 0 ; 0 1 0 ; 0 0 1   # M entries: diagonal; M*M: row-major
    noise_vars = 0.01                     # one value is shared by every agent
    regressor_dist = gaussian

    [run]
    horizon = 2000
    trials = 100
    seed = 0
    tail_window = 200         # optional, defaults to horizon // 10
    init = zero               # or random

    [output]
    dir = results/my_run

    [algorithm ah]            # one section per algorithm; the suffix is its label
    kind = primal_dual
    step_size = 0.046875
    eta = 0
    # linked_theta = 2        # optional, sets eta = step_size**(-1/theta)
    # combination = metropolis  (diffusion_atc / consensus; or identity)

``[topology]`` and ``[ensemble]`` may be omitted when ``library`` is given;
if present they replace the library's versions.
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data_model import AgentEnsemble, make_ensemble
from .graph import NetworkTopology, build_topology, identity_weights, load_topology, metropolis_weights
from .montecarlo import INITS, RunSpec
from .scenarios import SCENARIOS, scenario_library
from .strategies import KINDS, AlgorithmConfig

_NUMBER = re.compile(r"[+-]?(\d+(\.\d*)?|\.\d+)([eE][+-]?\d+)?")
_INT = re.compile(r"[+-]?\d+")
COMBINATIONS = ("metropolis", "identity")


class ConfigError(ValueError):
    """A config that cannot be parsed, resolved or validated."""


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    topology: NetworkTopology
    ensemble: AgentEnsemble
    algorithms: tuple[AlgorithmConfig, ...]
    horizon: int
    trials: int
    seed: int
    tail_window: int | None = None
    init: str = "zero"
    output_dir: str | None = None
    library: str | None = None
    library_seed: int | None = None

    def run_spec(self) -> RunSpec:
        return RunSpec(
            topology=self.topology,
            ensemble=self.ensemble,
            configs=self.algorithms,
            horizon=self.horizon,
            trials=self.trials,
            seed=self.seed,
            tail_window=self.tail_window,
            scenario_name=self.name,
            init=self.init,
        )


def parse_number(text: str, key: str = "value") -> float:
    text = text.strip()
    if not _NUMBER.fullmatch(text):
        raise ConfigError(f"{key}: {text!r} is not a decimal number")
    return float(text)


def parse_int(text: str, key: str = "value") -> int:
    text = text.strip()
    if not _INT.fullmatch(text):
        raise ConfigError(f"{key}: {text!r} is not an integer")
    return int(text)


def parse_numbers(text: str, key: str = "value") -> list[float]:
    items = [t for t in re.split(r"[\s,]+", text.strip()) if t]
    if not items:
        raise ConfigError(f"{key}: empty list")
    return [parse_number(t, key) for t in items]


def _parse_edges(text: str) -> list[tuple[int, int]]:
    edges = []
    for item in re.split(r"[\s,]+", text.strip()):
        if not item:
            continue
        m = re.fullmatch(r"(\d+)-(\d+)", item)
        if not m:
            raise ConfigError(f"edges: {item!r} is not of the form k-l")
        edges.append((int(m.group(1)), int(m.group(2))))
    return edges


def _topology_from(section, base_dir: Path) -> NetworkTopology:
    if "file" in section:
        path = base_dir / section["file"].strip()
        if not path.is_file():
            raise ConfigError(f"topology file not found: {path}")
        try:
            return load_topology(path)
        except ValueError as exc:
            raise ConfigError(f"topology file {path}: {exc}") from None
    if "edges" not in section or "nodes" not in section:
        raise ConfigError("[topology] needs either 'file' or both 'nodes' and 'edges'")
    try:
        return build_topology(parse_int(section["nodes"], "nodes"), _parse_edges(section["edges"]))
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"[topology]: {exc}") from None


def _ensemble_from(section, num_nodes: int) -> AgentEnsemble:
    for key in ("dim", "truth", "covariances", "noise_vars"):
        if key not in section:
            raise ConfigError(f"[ensemble] is missing '{key}'")
    M = parse_int(section["dim"], "dim")
    if M < 1:
        raise ConfigError("dim must be positive")
    truth = parse_numbers(section["truth"], "truth")
    agents = [a for a in section["covariances"].split(";") if a.strip()]
    covs = []
    for a in agents:
        vals = parse_numbers(a, "covariances")
        if len(vals) == M:
            covs.append(np.diag(vals))
        elif len(vals) == M * M:
            covs.append(np.array(vals).reshape(M, M))
        else:
            raise ConfigError(f"covariances: each agent needs {M} or {M * M} entries, got {len(vals)}")
    if len(covs) == 1:
        covs = covs * num_nodes
    if len(covs) != num_nodes:
        raise ConfigError(f"covariances: need 1 or {num_nodes} agents, got {len(covs)}")
    noise = parse_numbers(section["noise_vars"], "noise_vars")
    if len(noise) == 1:
        noise = noise * num_nodes
    try:
        return make_ensemble(
            M, truth, np.stack(covs), noise,
            regressor_dist=section.get("regressor_dist", "gaussian").strip(),
        )
    except ValueError as exc:
        raise ConfigError(f"[ensemble]: {exc}") from None


def _algorithm_from(label: str, section, topology: NetworkTopology) -> AlgorithmConfig:
    known = {"kind", "step_size", "eta", "linked_theta", "combination"}
    extra = set(section) - known
    if extra:
        raise ConfigError(f"[algorithm {label}]: unknown keys {sorted(extra)}")
    if "kind" not in section or "step_size" not in section:
        raise ConfigError(f"[algorithm {label}] needs 'kind' and 'step_size'")
    kind = section["kind"].strip()
    if kind not in KINDS:
        raise ConfigError(f"[algorithm {label}]: kind must be one of {KINDS}")
    combination = None
    if kind in ("diffusion_atc", "consensus"):
        rule = section.get("combination", "metropolis").strip()
        if rule not in COMBINATIONS:
            raise ConfigError(f"[algorithm {label}]: combination must be one of {COMBINATIONS}")
        combination = metropolis_weights(topology) if rule == "metropolis" else identity_weights(topology.num_nodes)
    theta = section.get("linked_theta")
    try:
        return AlgorithmConfig(
            kind=kind,
            step_size=parse_number(section["step_size"], "step_size"),
            eta=parse_number(section.get("eta", "0"), "eta"),
            linked_theta=None if theta is None or not theta.strip() else parse_number(theta, "linked_theta"),
            combination=combination,
            label=label,
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"[algorithm {label}]: {exc}") from None


def parse_config(text: str, base_dir: str | Path = ".") -> ScenarioConfig:
    """Parse config text; relative paths resolve against ``base_dir``."""
    parser = configparser.ConfigParser(
        interpolation=None, inline_comment_prefixes=("#",), comment_prefixes=("#",)
    )
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    base_dir = Path(base_dir)

    scen = parser["scenario"] if parser.has_section("scenario") else {}
    library = scen.get("library")
    library_seed = None
    lib = None
    if library:
        library = library.strip()
        if library not in SCENARIOS:
            raise ConfigError(f"unknown library scenario {library!r}; expected one of {SCENARIOS}")
        library_seed = parse_int(scen.get("library_seed", "2015"), "library_seed")
        lib = scenario_library(library, seed=library_seed)

    if parser.has_section("topology"):
        topology = _topology_from(parser["topology"], base_dir)
    elif lib is not None:
        topology = lib.topology
    else:
        raise ConfigError("no [topology] section and no library scenario")
    if not topology.connected:
        raise ConfigError("topology is not connected")

    if parser.has_section("ensemble"):
        ensemble = _ensemble_from(parser["ensemble"], topology.num_nodes)
    elif lib is not None:
        ensemble = lib.ensemble
    else:
        raise ConfigError("no [ensemble] section and no library scenario")
    if ensemble.num_agents != topology.num_nodes:
        raise ConfigError("topology and ensemble disagree on the number of agents")

    algorithms = []
    for name in parser.sections():
        if name == "algorithm" or name.startswith("algorithm "):
            label = name[len("algorithm"):].strip()
            if not label:
                raise ConfigError("algorithm sections must be named [algorithm <label>]")
            algorithms.append(_algorithm_from(label, parser[name], topology))
    if not algorithms:
        raise ConfigError("config defines no [algorithm <label>] section")

    if not parser.has_section("run"):
        raise ConfigError("config has no [run] section")
    run = parser["run"]
    if "horizon" not in run:
        raise ConfigError("[run] needs 'horizon'")
    init = run.get("init", "zero").strip()
    if init not in INITS:
        raise ConfigError(f"init must be one of {INITS}")
    tw = run.get("tail_window")
    cfg = ScenarioConfig(
        name=scen.get("name", library or "custom").strip(),
        topology=topology,
        ensemble=ensemble,
        algorithms=tuple(algorithms),
        horizon=parse_int(run["horizon"], "horizon"),
        trials=parse_int(run.get("trials", "100"), "trials"),
        seed=parse_int(run.get("seed", "0"), "seed"),
        tail_window=None if tw is None else parse_int(tw, "tail_window"),
        init=init,
        output_dir=parser.get("output", "dir", fallback=None),
        library=library,
        library_seed=library_seed,
    )
    try:
        cfg.run_spec()
    except ValueError as exc:
        raise ConfigError(f"[run]: {exc}") from None
    return cfg


def load_config(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_config(path.read_text(), base_dir=path.parent)


def _fmt(x: float) -> str:
    return repr(float(x))


def _fmt_list(xs) -> str:
    return " ".join(_fmt(x) for x in xs)


def _combination_rule(config: AlgorithmConfig, topology: NetworkTopology) -> str:
    W = config.combination.weights
    if np.array_equal(W, identity_weights(topology.num_nodes).weights):
        return "identity"
    if np.array_equal(W, metropolis_weights(topology).weights):
        return "metropolis"
    raise ConfigError(f"{config.label}: combination matrix is neither metropolis nor identity")


def emit_config(cfg: ScenarioConfig) -> str:
    """Config text that parses back to ``cfg`` (floats are written with ``repr``).

    Library scenarios are referenced by name and seed; anything else is
    written inline.
    """
    out = ["[scenario]", f"name = {cfg.name}"]
    if cfg.library is not None:
        out += [f"library = {cfg.library}", f"library_seed = {cfg.library_seed}"]
    else:
        topo, ens = cfg.topology, cfg.ensemble
        out += ["", "[topology]", f"nodes = {topo.num_nodes}",
                "edges = " + " ".join(f"{k}-{l}" for k, l in topo.edges)]
        covs = " ; ".join(_fmt_list(R.reshape(-1)) for R in ens.covariances)
        out += ["", "[ensemble]", f"dim = {ens.dim}", f"truth = {_fmt_list(ens.truth)}",
                f"covariances = {covs}", f"noise_vars = {_fmt_list(ens.noise_vars)}",
                f"regressor_dist = {ens.regressor_dist}"]
    out += ["", "[run]", f"horizon = {cfg.horizon}", f"trials = {cfg.trials}", f"seed = {cfg.seed}"]
    if cfg.tail_window is not None:
        out.append(f"tail_window = {cfg.tail_window}")
    out.append(f"init = {cfg.init}")
    if cfg.output_dir is not None:
        out += ["", "[output]", f"dir = {cfg.output_dir}"]
    for a in cfg.algorithms:
        out += ["", f"[algorithm {a.label}]", f"kind = {a.kind}", f"step_size = {_fmt(a.step_size)}"]
        if a.linked_theta is not None:
            out.append(f"linked_theta = {_fmt(a.linked_theta)}")
        elif a.kind == "primal_dual":
            out.append(f"eta = {_fmt(a.eta)}")
        if a.combination is not None:
            out.append(f"combination = {_combination_rule(a, cfg.topology)}")
    return "\n".join(out) + "\n"
