import argparse
import logging
import math
import sys
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from components.bench import make_test_function, run_convergence
from components.cardinal import COEFFICIENT_KINDS, SYMBOL_P, SynthesisBudget, decay_fit, symbol_coefficients
from components.config import ConfigComponent, RunConfig
from components.interp import build, default_accuracy, evaluate, sample
from components.kernel import MultiquadricParams, PeriodizationConfig, cardinal_spectrum
from components.multiplier import QuadratureConfig, m_eval, mikhlin_check, scaling_fit
from components.reports import CONVERGENCE_COLUMNS, ReportGenerator
from components.tables import TableCache, TableComponent
from components.verify import AcceptanceSuite
from utils.errors import ConfigError, ResourceBudgetError
from utils.format_helpers import format_multi_index, format_pass

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_CONFIG = 2
EXIT_BUDGET = 3


def _float_list(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got '{text}'") from e


def _int_list(text: str) -> List[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{text}'") from e


def _p_value(text: str) -> float:
    if text.lower() in ("inf", "infinity"):
        return math.inf
    return float(text)


class MultiquadricLab:
    """Dispatches each subcommand and renders its result."""

    def __init__(self, run_config: RunConfig):
        self.run_config = run_config
        self.settings = run_config.settings
        self.cfg = PeriodizationConfig.from_config(self.settings)
        self.budget = SynthesisBudget.from_config(self.settings)
        self.cache = TableCache(run_config.cache_dir, self.cfg, self.budget)
        self.workers = int(self.settings.get("bench", {}).get("workers", 1))

    def _accuracy(self, dim: int) -> float:
        value = self.run_config.param("accuracy")
        if value is not None:
            return float(value)
        synthesis = self.settings.get("synthesis", {})
        return float(synthesis.get(f"target_accuracy_{min(dim, 2)}d", default_accuracy(dim)))

    def _emit(self, result: Dict[str, Any], rows: Sequence[Dict[str, Any]], columns: Sequence[str]) -> None:
        echo = self.run_config.to_dict()
        if self.run_config.format == "csv":
            content = ReportGenerator.generate_csv_report(rows, columns, echo)
        else:
            content = ReportGenerator.generate_json_report(result, echo)
        ReportGenerator.emit(content, self.run_config.output)

    def spectrum(self, args) -> int:
        xi = np.linspace(args.xi_min, args.xi_max, args.n)
        pts = np.zeros((args.n, args.dim))
        pts[:, 0] = xi
        rows = []
        if args.h is not None:
            values = np.asarray(m_eval(args.alpha, args.dim, args.h, pts, self.cfg))
            label = "m"
        else:
            params = MultiquadricParams(args.alpha, args.c, args.dim)
            values = np.asarray(cardinal_spectrum(params, pts, self.cfg))
            label = "L_hat"
        for x, v in zip(xi, np.atleast_1d(values)):
            rows.append({"xi": x, label: v})
        self._emit({"quantity": label, "rows": rows}, rows, ("xi", label))
        return EXIT_OK

    def cardinal(self, args) -> int:
        params = MultiquadricParams(args.alpha, args.c, args.dim)
        radius = args.radius or float(self.settings.get("synthesis", {}).get("spatial_radius", 8.0))
        table = self.cache.get_or_synthesize(params, self._accuracy(args.dim), radius)
        if args.export:
            TableComponent.export_csv(table, args.export)
        residual = table.integer_node_residual(min(5, int(radius)))
        result = {"table": table.metadata(), "node_residual": residual}
        if radius > 10.0:
            fit = decay_fit(table, floor=max(1e-12, 100.0 * table.accuracy_estimate))
            result["decay"] = {"slope": fit.slope, "residual": fit.residual, "below_floor": fit.below_floor}
        q = table.nodes_per_unit
        line = table.orthant[(slice(0, None, q),) + (0,) * (args.dim - 1)]
        rows = [{"k": k, "L": v} for k, v in enumerate(line)]
        self._emit(result, rows, ("k", "L"))
        return EXIT_OK

    def coeffs(self, args) -> int:
        params = MultiquadricParams(args.alpha, args.c, args.dim)
        oversampling = int(self.settings.get("coefficients", {}).get("oversampling", 8))
        coeffs = symbol_coefficients(params, args.kind, args.radius, dft_size=oversampling * args.radius,
                                     cfg=self.cfg)
        slope, residual = coeffs.decay_slope(j_min=min(8, args.radius // 2))
        center = (args.radius,) * (args.dim - 1)
        line = coeffs.values[(slice(None),) + center]
        rows = [{"j": j, "value": v} for j, v in zip(range(-args.radius, args.radius + 1), line)]
        result = {"kind": coeffs.kind, "params": params.to_dict(), "index_radius": coeffs.index_radius,
                  "decay_slope": slope, "fit_residual": residual, "aliasing_change": coeffs.aliasing_change,
                  "l1_norm": coeffs.l1_norm(), "coefficients": rows}
        self._emit(result, rows, ("j", "value"))
        return EXIT_OK

    def interp(self, args) -> int:
        tf = make_test_function(args.family, args.order, args.dim, args.support)
        n = int(math.ceil(args.support / args.h)) + 1
        samples = sample(tf, args.h, n, dim=args.dim)
        window = 1.5 * args.support
        interpolant = build(args.alpha, args.dim, args.h, samples, self._accuracy(args.dim),
                            eval_radius=window, cfg=self.cfg, cache=self.cache)
        rng = np.random.default_rng(self.run_config.seed)
        pts = rng.uniform(-window, window, size=(args.points, args.dim))
        values = np.atleast_1d(evaluate(interpolant, pts))
        exact = np.atleast_1d(tf(pts))
        nodes = samples.nodes()
        node_residual = float(np.max(np.abs(np.atleast_1d(evaluate(interpolant, nodes)) - samples.values.ravel())))
        rows = [{**{f"x{i}": p[i] for i in range(args.dim)}, "interpolant": v, "exact": e}
                for p, v, e in zip(pts, values, exact)]
        result = {"test_function": tf.name, "h": args.h, "node_residual": node_residual,
                  "max_abs_error": float(np.max(np.abs(values - exact))), "points": rows}
        columns = tuple(f"x{i}" for i in range(args.dim)) + ("interpolant", "exact")
        self._emit(result, rows, columns)
        return EXIT_OK

    def converge(self, args) -> int:
        tf = make_test_function(args.family, args.order, args.dim, args.support, p=args.p)
        bench = self.settings.get("bench", {})
        h_list = args.h or bench.get(f"h_list_{min(args.dim, 2)}d")
        grid_step = args.grid_step or bench.get(f"grid_step_{min(args.dim, 2)}d")
        window = args.window or float(bench.get("window_factor", 1.5)) * args.support
        report = run_convergence(args.alpha, args.dim, args.p, tf, h_list, window=window,
                                 grid_step=grid_step, accuracy=self._accuracy(args.dim),
                                 cache=self.cache, cfg=self.cfg, workers=self.workers)
        self._emit(report.to_dict(), report.csv_rows(), CONVERGENCE_COLUMNS)
        return EXIT_OK

    def multiplier(self, args) -> int:
        h_list = args.h or self.settings.get("multiplier", {}).get("h_list")
        gammas = [tuple(g) for g in (args.gamma or [[1] + [0] * (args.dim - 1)])]
        quad = QuadratureConfig.from_config(self.settings)
        profile = scaling_fit(args.alpha, args.dim, h_list, gammas, quad, self.cfg, workers=self.workers)
        result = profile.to_dict()
        if args.mikhlin:
            result["mikhlin"] = {
                str(h): {format_multi_index(g): s for g, s in
                         mikhlin_check(args.alpha, args.dim, h, cfg=self.cfg).items()}
                for h in h_list}
        rows = [{"h": r.h, "gamma": format_multi_index(r.gamma), "l1_norm": r.value, "error_bar": r.error_bar,
                 "excluded": r.n_excluded, **r.region_sups} for r in profile.results]
        self._emit(result, rows, ("h", "gamma", "l1_norm", "error_bar", "excluded", "I", "II", "III"))
        return EXIT_OK

    def verify(self, args) -> int:
        suite = AcceptanceSuite(self.settings, self.cache, self.workers)
        results = suite.run(args.criteria)
        for r in results:
            logger.info(f"[{format_pass(r.passed)}] {r.id:2d} {r.name}: {r.detail}")
        echo = self.run_config.to_dict()
        if self.run_config.format == "csv":
            content = AcceptanceSuite.csv(results, echo)
        else:
            content = ReportGenerator.generate_json_report(
                {"criteria": [{**r.row(), "runtime_ms": r.runtime_ms} for r in results],
                 "all_passed": all(r.passed for r in results)}, echo)
        ReportGenerator.emit(content, self.run_config.output)
        return EXIT_OK if all(r.passed for r in results) else EXIT_VERIFY_FAILED


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="configuration file (default: config.json)")
    common.add_argument("--output", "-o", default=None, help="output path, '-' for stdout")
    common.add_argument("--format", choices=("json", "csv"), default=None)
    common.add_argument("--cache-dir", dest="cache_dir", default=None)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--log-level", dest="log_level", default="INFO",
                        choices=("DEBUG", "INFO", "WARNING", "ERROR"))
    common.add_argument("--accuracy", type=float, default=None)

    parser = argparse.ArgumentParser(prog="mq-cardinal",
                                     description="Multiquadric cardinal interpolation on lattices")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spectrum", parents=[common], help="tabulate L_hat or the multiplier m")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--c", type=float, default=1.0)
    p.add_argument("--dim", type=int, default=1)
    p.add_argument("--h", type=float, default=None, help="tabulate m at this spacing instead of L_hat")
    p.add_argument("--xi-min", dest="xi_min", type=float, default=-3.0 * math.pi)
    p.add_argument("--xi-max", dest="xi_max", type=float, default=3.0 * math.pi)
    p.add_argument("--n", type=int, default=601)

    p = sub.add_parser("cardinal", parents=[common], help="synthesize a cardinal table")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--c", type=float, default=1.0)
    p.add_argument("--dim", type=int, default=1)
    p.add_argument("--radius", type=float, default=None)
    p.add_argument("--export", default=None, help="write the table as CSV")

    p = sub.add_parser("coeffs", parents=[common], help="Fourier coefficients of the periodic symbol")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--c", type=float, default=1.0)
    p.add_argument("--dim", type=int, default=1)
    p.add_argument("--radius", type=int, default=64)
    p.add_argument("--kind", choices=COEFFICIENT_KINDS, default=SYMBOL_P)

    p = sub.add_parser("interp", parents=[common], help="interpolate a test function")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--dim", type=int, default=1)
    p.add_argument("--h", type=float, required=True)
    p.add_argument("--family", default="bspline")
    p.add_argument("--order", type=int, default=3)
    p.add_argument("--support", type=float, default=1.0)
    p.add_argument("--points", type=int, default=100)

    p = sub.add_parser("converge", parents=[common], help="convergence experiment")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--dim", type=int, default=1)
    p.add_argument("--p", type=_p_value, default=2.0)
    p.add_argument("--family", default="bspline")
    p.add_argument("--order", type=int, default=3)
    p.add_argument("--support", type=float, default=1.0)
    p.add_argument("--h", type=_float_list, default=None)
    p.add_argument("--window", type=float, default=None)
    p.add_argument("--grid-step", dest="grid_step", type=float, default=None)

    p = sub.add_parser("multiplier", parents=[common], help="multiplier derivative scaling")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--dim", type=int, default=1)
    p.add_argument("--h", type=_float_list, default=None)
    p.add_argument("--gamma", type=_int_list, action="append", default=None,
                   help="multi-index such as 1,0; repeatable")
    p.add_argument("--mikhlin", action="store_true")

    p = sub.add_parser("verify", parents=[common], help="run the acceptance suite")
    p.add_argument("--criteria", type=_int_list, default=None, help="subset such as 1,2,5")
    return parser


def _freeze(value: Any) -> Any:
    if isinstance(value, list):
        return tuple(_freeze(v) for v in value)
    return value


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=[logging.StreamHandler(sys.stderr)],
        force=True)

    try:
        settings = ConfigComponent.load_config(args.config)
        for key, value in vars(args).items():
            setattr(args, key, _freeze(value))
        run_config = RunConfig.from_args(args, settings)
        lab = MultiquadricLab(run_config)
        logger.info(f"Running '{args.command}'")
        return getattr(lab, args.command)(args)
    except ResourceBudgetError as e:
        logger.error(f"Resource budget exceeded: {str(e)}", exc_info=True)
        return EXIT_BUDGET
    except (ConfigError, ValueError) as e:
        logger.error(f"Invalid configuration or parameters: {str(e)}", exc_info=True)
        return EXIT_CONFIG
    except Exception as e:
        logger.error(f"Error running '{args.command}': {str(e)}", exc_info=True)
        return EXIT_VERIFY_FAILED


if __name__ == "__main__":
    sys.exit(main())
