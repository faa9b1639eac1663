"""Run orchestration: configuration, the sampler driver loop, and output
files. All emitted files are deterministic functions of (config, data):
floats are written with repr (shortest round-trip), JSON keys are sorted,
and nothing records wall-clock state.
"""

import json
import logging
import math
import os
from dataclasses import asdict, dataclass, field

import numpy as np

try:
    import tomllib
except ImportError:
    import tomli as tomllib

from . import __version__
from .backfit import ForestState, Hyperparams, gibbs_sweep, init_state
from .base_model import BaseModel
from .basis import KERNEL_FAMILIES, Kernel
from .data import Dataset, build_dataset, load_csv
from .density import default_y_grid, evaluate_density_grid, posterior_summary, predictive_mean
from .errors import ConfigError
from .links import get_link
from .trees import SoftTree

log = logging.getLogger("sbartds")

CHECKPOINT_FORMAT = 1
MANIFEST_FORMAT = 1


@dataclass
class RunConfig:
    """Complete run description; defaults are the package's default prior."""

    data_path: str = ""
    response: str = "y"
    predictors: list = field(default_factory=list)
    link: str = "probit"
    nu: float | None = None
    n_trees: int = 50
    kernel: str = "se"
    kernel_nu: float = 1.0
    iterations: int = 3000
    burn_in: int = 1000
    thinning: int = 1
    chains: int = 1
    seed: int = 0
    tree_alpha: float = 0.95
    tree_beta: float = 2.0
    max_depth: int = 10
    sigma_mu_scale: float = 1.5
    gamma_mean: float = 1.0
    gamma_var: float = 1.0
    tau_mean: float = 0.1
    rho_shape: float = 1.0
    rho_rate: float = math.pi**2 / 4.0
    a_shape1: float = 0.5
    a_shape2: float = 1.0
    grid_points: int = 512
    grid_pad_sds: float = 3.0
    x_queries: list = field(default_factory=list)
    out_dir: str = "run_out"
    save_density_draws: bool = False

    def validate(self):
        if self.iterations <= self.burn_in or self.burn_in < 0:
            raise ConfigError("need iterations > burn_in >= 0")
        if self.thinning < 1:
            raise ConfigError("need thinning >= 1")
        if self.chains < 1:
            raise ConfigError("need chains >= 1")
        if self.n_trees < 1:
            raise ConfigError("need n_trees >= 1")
        if self.kernel not in KERNEL_FAMILIES:
            raise ConfigError(f"unknown kernel {self.kernel!r}")
        if self.grid_points < 64:
            raise ConfigError("need grid_points >= 64")
        if self.tau_mean <= 0 or self.sigma_mu_scale <= 0:
            raise ConfigError("scale hyperparameters must be positive")
        get_link(self.link, self.nu)
        for row in self.x_queries:
            if not hasattr(row, "__len__"):
                raise ConfigError("each query must be a row of predictor values")
        return self

    def hyperparams(self):
        return Hyperparams(
            alpha=self.tree_alpha,
            beta=self.tree_beta,
            max_depth=self.max_depth,
            sigma_mu_scale=self.sigma_mu_scale,
            gamma_mean=self.gamma_mean,
            gamma_var=self.gamma_var,
            tau_rate=1.0 / self.tau_mean,
            rho_shape=self.rho_shape,
            rho_rate=self.rho_rate,
            a_shape1=self.a_shape1,
            a_shape2=self.a_shape2,
        )

    def to_dict(self):
        return {
            "data": {
                "path": self.data_path,
                "response": self.response,
                "predictors": list(self.predictors),
            },
            "model": {
                "link": self.link,
                **({"nu": self.nu} if self.nu is not None else {}),
                "n_trees": self.n_trees,
                "kernel": self.kernel,
                "kernel_nu": self.kernel_nu,
            },
            "mcmc": {
                "iterations": self.iterations,
                "burn_in": self.burn_in,
                "thinning": self.thinning,
                "chains": self.chains,
                "seed": self.seed,
            },
            "prior": {
                "tree_alpha": self.tree_alpha,
                "tree_beta": self.tree_beta,
                "max_depth": self.max_depth,
                "sigma_mu_scale": self.sigma_mu_scale,
                "gamma_mean": self.gamma_mean,
                "gamma_var": self.gamma_var,
                "tau_mean": self.tau_mean,
                "rho_shape": self.rho_shape,
                "rho_rate": self.rho_rate,
                "a_shape1": self.a_shape1,
                "a_shape2": self.a_shape2,
            },
            "grid": {"n_points": self.grid_points, "pad_sds": self.grid_pad_sds},
            "queries": {"x": [list(map(float, row)) for row in self.x_queries]},
            "output": {
                "directory": self.out_dir,
                "save_density_draws": self.save_density_draws,
            },
        }


_SECTION_FIELDS = {
    "data": {"path": "data_path", "response": "response", "predictors": "predictors"},
    "model": {
        "link": "link",
        "nu": "nu",
        "n_trees": "n_trees",
        "kernel": "kernel",
        "kernel_nu": "kernel_nu",
    },
    "mcmc": {
        "iterations": "iterations",
        "burn_in": "burn_in",
        "thinning": "thinning",
        "chains": "chains",
        "seed": "seed",
    },
    "prior": {
        "tree_alpha": "tree_alpha",
        "tree_beta": "tree_beta",
        "max_depth": "max_depth",
        "sigma_mu_scale": "sigma_mu_scale",
        "gamma_mean": "gamma_mean",
        "gamma_var": "gamma_var",
        "tau_mean": "tau_mean",
        "rho_shape": "rho_shape",
        "rho_rate": "rho_rate",
        "a_shape1": "a_shape1",
        "a_shape2": "a_shape2",
    },
    "grid": {"n_points": "grid_points", "pad_sds": "grid_pad_sds"},
    "queries": {"x": "x_queries"},
    "output": {"directory": "out_dir", "save_density_draws": "save_density_draws"},
}


def config_from_dict(doc):
    """Build a validated RunConfig from a TOML-shaped nested dict."""
    kwargs = {}
    for section, content in doc.items():
        if section not in _SECTION_FIELDS:
            raise ConfigError(f"unknown config section [{section}]")
        if not isinstance(content, dict):
            raise ConfigError(f"config section [{section}] must be a table")
        known = _SECTION_FIELDS[section]
        for key, value in content.items():
            if key not in known:
                raise ConfigError(f"unknown config key {key!r} in section [{section}]")
            kwargs[known[key]] = value
    return RunConfig(**kwargs).validate()


def load_config(path):
    with open(path, "rb") as fh:
        try:
            doc = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    return config_from_dict(doc)


DEFAULT_CONFIG_TOML = """\
# sbartds run configuration. Values shown are the defaults.

[data]
path = "data.csv"      # input CSV with a header row
response = "y"         # response column name
predictors = []        # empty list = every non-response column

[model]
link = "probit"        # probit | logit | t (t requires nu)
# nu = 4.0             # degrees of freedom, t link only
n_trees = 50           # ensemble size
kernel = "se"          # se | matern | cauchy; spectral law of the frequencies
kernel_nu = 1.0        # matern smoothness (matern kernel only)

[mcmc]
iterations = 3000
burn_in = 1000
thinning = 1
chains = 1
seed = 0

[prior]
tree_alpha = 0.95      # branch probability alpha (1 + depth)^-beta
tree_beta = 2.0
max_depth = 10
sigma_mu_scale = 1.5   # half-Cauchy scale of the leaf sd sigma_mu
gamma_mean = 1.0       # normal prior on the offset gamma
gamma_var = 1.0
tau_mean = 0.1         # exponential prior mean of the tree bandwidths
rho_shape = 1.0        # gamma prior (shape, rate) on rho^2
rho_rate = 2.4674011002723395  # pi^2 / 4
a_shape1 = 0.5         # beta hyperprior on a / (a + P)
a_shape2 = 1.0

[grid]
n_points = 512         # y evaluation grid size
pad_sds = 3.0          # grid padding in base-model sds beyond the data range

[queries]
x = []                 # raw-scale predictor rows for density evaluation

[output]
directory = "run_out"
save_density_draws = false
"""


def write_default_config(path, force=False):
    if os.path.exists(path) and not force:
        raise ConfigError(f"{path} exists; pass --force to overwrite")
    with open(path, "w") as fh:
        fh.write(DEFAULT_CONFIG_TOML)


@dataclass
class PosteriorDraw:
    """One retained sweep: a state snapshot plus augmentation bookkeeping."""

    chain: int
    iteration: int
    state: ForestState
    sum_rejected: int


def snapshot_state(state):
    return ForestState(
        trees=[t.clone() for t in state.trees],
        gamma=state.gamma,
        sigma_mu=state.sigma_mu,
        s=state.s.copy(),
        a=state.a,
        kernel=state.kernel,
        theta=BaseModel(state.theta.alpha, state.theta.beta.copy(), state.theta.sigma),
        link=state.link,
        hyper=state.hyper,
    )


def state_to_dict(state):
    link = {"name": state.link.name}
    if link["name"] == "t":
        link["nu"] = state.link.nu
    return {
        "trees": [t.to_dict() for t in state.trees],
        "gamma": state.gamma,
        "sigma_mu": state.sigma_mu,
        "s": state.s.tolist(),
        "a": state.a,
        "kernel": {
            "family": state.kernel.family,
            "rho": state.kernel.rho,
            "nu": state.kernel.nu,
        },
        "theta": {
            "alpha": state.theta.alpha,
            "beta": state.theta.beta.tolist(),
            "sigma": state.theta.sigma,
        },
        "link": link,
        "hyper": asdict(state.hyper),
    }


def state_from_dict(doc):
    return ForestState(
        trees=[SoftTree.from_dict(t) for t in doc["trees"]],
        gamma=doc["gamma"],
        sigma_mu=doc["sigma_mu"],
        s=np.asarray(doc["s"], dtype=float),
        a=doc["a"],
        kernel=Kernel(**doc["kernel"]),
        theta=BaseModel(
            alpha=doc["theta"]["alpha"],
            beta=np.asarray(doc["theta"]["beta"], dtype=float),
            sigma=doc["theta"]["sigma"],
        ),
        link=get_link(doc["link"]["name"], doc["link"].get("nu")),
        hyper=Hyperparams(**doc["hyper"]),
    )


def run_mcmc(config, data):
    """Run the configured chains. Returns (draws, final chain states with
    rng states for checkpointing). Bit-reproducible for a given
    (seed, chain index): each chain's generator is seeded with that pair.
    """
    config.validate()
    link = get_link(config.link, config.nu)
    kernel = Kernel(family=config.kernel, nu=config.kernel_nu)
    hyper = config.hyperparams()
    draws = []
    finals = []
    for chain in range(config.chains):
        rng = np.random.default_rng([config.seed, chain])
        state = init_state(
            rng,
            data.X,
            data.y_std,
            link,
            kernel=kernel,
            n_trees=config.n_trees,
            hyper=hyper,
        )
        for it in range(1, config.iterations + 1):
            ws = gibbs_sweep(rng, state, data.X, data.y_std)
            sum_rejected = int(ws.aug.counts().sum())
            log.debug(
                "chain %d iteration %d rejected %d", chain, it, sum_rejected
            )
            if it > config.burn_in and (it - config.burn_in - 1) % config.thinning == 0:
                draws.append(
                    PosteriorDraw(
                        chain=chain,
                        iteration=it,
                        state=snapshot_state(state),
                        sum_rejected=sum_rejected,
                    )
                )
        finals.append((chain, state, rng.bit_generator.state))
        log.info("chain %d finished: %d iterations", chain, config.iterations)
    return draws, finals


def _fmt(value):
    return repr(float(value))


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def _interval_rows(name_values):
    """median and central 66% / 95% interval columns per named series."""
    rows = []
    for name, values in name_values:
        q = np.quantile(values, [0.5, 0.17, 0.83, 0.025, 0.975])
        rows.append([name] + [_fmt(v) for v in q])
    return rows


def mean_tree_depth(state):
    return float(np.mean([t.depth() for t in state.trees]))


def emit_outputs(draws, config, data, out_dir=None):
    """Write every run artifact into the output directory.

    Densities are computed on the standardized scale and written on the
    raw scale (grid mapped back, values divided by the response sd).
    """
    if not draws:
        raise ConfigError("no retained draws to emit")
    out_dir = out_dir if out_dir is not None else config.out_dir
    os.makedirs(out_dir, exist_ok=True)

    states = [d.state for d in draws]
    sigma_hat = float(np.median([st.theta.sigma for st in states]))
    y_grid = default_y_grid(
        data.y_std, sigma_hat, n_points=config.grid_points, pad_sds=config.grid_pad_sds
    )
    y_raw = data.y_raw(y_grid)

    summary = {"y_grid": y_raw.tolist(), "queries": []}
    if config.x_queries:
        x_raw = np.atleast_2d(np.asarray(config.x_queries, dtype=float))
        x_std = data.transform_x(x_raw)
        grid = evaluate_density_grid(states, x_std, y_grid)
        grid.draws /= data.y_sd
        mean, lower, upper = posterior_summary(grid)
        for q in range(len(x_raw)):
            summary["queries"].append(
                {
                    "x_id": q,
                    "x_raw": x_raw[q].tolist(),
                    "mean": mean[q].tolist(),
                    "lower": lower[q].tolist(),
                    "upper": upper[q].tolist(),
                }
            )
        if config.save_density_draws:
            rows = []
            for d in range(grid.draws.shape[0]):
                for q in range(grid.draws.shape[1]):
                    for k in range(grid.draws.shape[2]):
                        rows.append(
                            [
                                str(d),
                                str(q),
                                _fmt(y_raw[k]),
                                _fmt(grid.draws[d, q, k]),
                            ]
                        )
            _write_csv(
                os.path.join(out_dir, "density_draws.csv"),
                ["draw", "x_id", "y", "density"],
                rows,
            )
        pm_rows = []
        for q in range(len(x_raw)):
            pm_draws = data.y_raw(
                [predictive_mean(st, x_std[q], y_grid) for st in states]
            )
            qs = np.quantile(pm_draws, [0.5, 0.025, 0.975])
            pm_rows.append(
                [str(q)]
                + [_fmt(v) for v in [pm_draws.mean(), qs[0], qs[1], qs[2]]]
            )
        _write_csv(
            os.path.join(out_dir, "predictive_mean.csv"),
            ["x_id", "mean", "median", "lower95", "upper95"],
            pm_rows,
        )
    with open(os.path.join(out_dir, "density_summary.json"), "w") as fh:
        json.dump(summary, fh, sort_keys=True, indent=1)

    s_draws = np.array([st.s for st in states])
    _write_csv(
        os.path.join(out_dir, "split_probs.csv"),
        ["predictor", "median", "lower66", "upper66", "lower95", "upper95"],
        _interval_rows(
            (data.colnames[j], s_draws[:, j]) for j in range(s_draws.shape[1])
        ),
    )

    coef_series = [("alpha", np.array([st.theta.alpha for st in states]))]
    betas = np.array([st.theta.beta for st in states])
    for j, name in enumerate(data.colnames):
        coef_series.append((f"beta_{name}", betas[:, j]))
    coef_series.append(("sigma", np.array([st.theta.sigma for st in states])))
    _write_csv(
        os.path.join(out_dir, "base_coefficients.csv"),
        ["coefficient", "median", "lower66", "upper66", "lower95", "upper95"],
        _interval_rows(coef_series),
    )

    _write_csv(
        os.path.join(out_dir, "trace.csv"),
        [
            "chain",
            "iteration",
            "gamma",
            "sigma_mu",
            "rho",
            "a",
            "mean_depth",
            "sum_rejected",
        ],
        [
            [
                str(d.chain),
                str(d.iteration),
                _fmt(d.state.gamma),
                _fmt(d.state.sigma_mu),
                _fmt(d.state.rho),
                _fmt(d.state.a),
                _fmt(mean_tree_depth(d.state)),
                str(d.sum_rejected),
            ]
            for d in draws
        ],
    )


def write_manifest(config, out_dir):
    import scipy

    manifest = {
        "format_version": MANIFEST_FORMAT,
        "config": config.to_dict(),
        "seed": config.seed,
        "versions": {
            "sbartds": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
    }
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=1)


def write_checkpoint(finals, out_dir):
    doc = {
        "format_version": CHECKPOINT_FORMAT,
        "chains": [
            {
                "chain": chain,
                "state": state_to_dict(state),
                "rng_state": rng_state,
            }
            for chain, state, rng_state in finals
        ],
    }
    with open(os.path.join(out_dir, "checkpoint.json"), "w") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)


def run_from_config(config):
    """Full fit pipeline: ingest, sample, emit. Returns the output dir."""
    config.validate()
    if not config.data_path:
        raise ConfigError("data.path is required for fitting")
    X_raw, y_raw, names = load_csv(
        config.data_path, config.response, config.predictors or None
    )
    data = build_dataset(X_raw, y_raw, names)
    draws, finals = run_mcmc(config, data)
    os.makedirs(config.out_dir, exist_ok=True)
    emit_outputs(draws, config, data)
    write_checkpoint(finals, config.out_dir)
    write_manifest(config, config.out_dir)
    return config.out_dir
