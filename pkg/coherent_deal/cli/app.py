"""
Command-line application
Parses arguments, dispatches to the engine and writes JSON/CSV results.
"""
import argparse
import logging
import sys
from typing import Any, Dict, List, Mapping, Optional, TextIO, Tuple

import numpy as np

from .. import __version__
from ..core.algebra import convolve_wvar, minimal_concave_majorant, weighting_measure
from ..core.config import THREADS_ENV, Config
from ..core.errors import CoherentDealError, DomainError, NsaoViolation, UsageError
from ..core.estimation import (
    est_alpha_var,
    est_beta_var,
    est_factor_risk,
    est_factor_risk_contribution,
    est_risk_contribution,
    est_upper_price,
    est_wvar,
)
from ..core.pricing import (
    MODES,
    MarketModel,
    PositionConstraint,
    ValuationGroup,
    dual_bruteforce,
    liquidity_curve,
    nsao_check,
    price_interval,
    superrep_split,
)
from ..core.scenario import RandomVariable, ScenarioSpace, load_samples, load_scenarios
from ..core.sensitivity import bond_option_delta_payoff, call_delta_payoff, delta_interval
from ..core.spectral import distortion, rho_wvar
from ..core.transforms import (
    extreme_measure,
    factor_risk_contribution,
    multi_factor_risk,
    risk_contribution,
)
from ..utils.file_utils import csv_text, dumps_json, write_text
from ..utils.logger import Logger
from .specs import (
    GROUP_FORMS,
    load_schedule,
    measure_payload,
    parse_box,
    parse_group,
    parse_measure,
    parse_volumes,
)

logger = logging.getLogger(__name__)

ORACLE_TOLERANCE = 1e-7
RISK_KINDS = ("wvar", "factor", "contribution", "factor-contribution")
ESTIMATORS = ("wvar", "alphavar", "betavar", "contribution", "factor", "factor-contribution", "upper-price")


class UsageParser(argparse.ArgumentParser):
    """Argument parser that reports problems as usage errors instead of exiting"""

    def error(self, message: str) -> None:
        raise UsageError(message)


def _column(columns: Mapping[str, Any], name: Optional[str], what: str) -> Any:
    if name is None:
        raise UsageError(f"Missing {what} column")
    if name not in columns:
        raise DomainError(f"Unknown {what} column {name!r}; available: {sorted(columns)}")
    return columns[name]


class CommandLineApp:
    """Command-line front door"""

    def __init__(
        self,
        environ: Optional[Mapping[str, str]] = None,
        stdout: Optional[TextIO] = None,
        stderr: Optional[TextIO] = None
    ):
        """
        Initialize the application

        Args:
            environ: environment used for setting overlays (defaults to os.environ)
            stdout: result stream
            stderr: error stream
        """
        self.environ = environ
        self.stdout = stdout or sys.stdout
        self.stderr = stderr or sys.stderr
        self.config = Config(environ=environ)
        self.output: Optional[str] = None
        self.parser = self.build_parser()

    def build_parser(self) -> argparse.ArgumentParser:
        """Create the argument parser with one subcommand per engine operation"""
        parser = UsageParser(prog="coherent-deal", description="Coherent risk and good-deal pricing on scenario sets")
        parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
        parser.add_argument("--config", help="JSON settings file")
        parser.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
        parser.add_argument("--log-file", help="also write log records to this file")
        parser.add_argument("--threads", type=int, help=f"worker threads (overrides {THREADS_ENV})")
        parser.add_argument("--output", help="write the result here instead of stdout")
        commands = parser.add_subparsers(dest="command", parser_class=UsageParser)
        commands.required = True

        risk = commands.add_parser("risk", help="risk of a scenario column")
        self._add_scenario_args(risk)
        risk.add_argument("--variable", required=True)
        risk.add_argument("--measure", required=True, help=GROUP_FORMS)
        risk.add_argument("--kind", choices=RISK_KINDS, default="wvar")
        risk.add_argument("--factor", action="append", default=[], help="conditioning column (repeatable)")
        risk.add_argument("--wealth", help="portfolio column for contributions")

        price = commands.add_parser("price", help="interval of fair prices")
        self._add_market_args(price)
        price.add_argument("--claim", required=True)
        price.add_argument("--mode", choices=MODES, default="conv")
        price.add_argument("--oracle", action="store_true", help="cross-check with the dual oracle")

        ftap = commands.add_parser("ftap", help="no strictly acceptable opportunities check")
        self._add_market_args(ftap)
        ftap.add_argument("--mode", choices=MODES, default="conv")

        superrep = commands.add_parser("superrep", help="superreplication tranche plan")
        self._add_market_args(superrep)
        superrep.add_argument("--claim", required=True)

        liquidity = commands.add_parser("liquidity", help="volume-dependent price curve (CSV)")
        self._add_market_args(liquidity)
        liquidity.add_argument("--claim", required=True)
        liquidity.add_argument("--volumes", required=True, help="v1,v2,... or START:STOP:COUNT")

        delta = commands.add_parser("delta", help="interval of deltas")
        self._add_market_args(delta)
        delta.add_argument("--payoff", choices=["call", "bond"], required=True)
        delta.add_argument("--xi", required=True, help="growth/rate factor column")
        delta.add_argument("--spot", type=float)
        delta.add_argument("--strike", type=float, required=True)
        delta.add_argument("--rate", type=float, required=True, help="rate per year (short rate for bonds)")
        delta.add_argument("--expiry", type=float, required=True)
        delta.add_argument("--schedule", help="bond cashflow schedule JSON")
        delta.add_argument("--mode", choices=MODES, default="conv")

        estimate = commands.add_parser("estimate", help="empirical estimators from sample CSV")
        estimate.add_argument("--samples", required=True)
        estimate.add_argument("--estimator", choices=ESTIMATORS, required=True)
        estimate.add_argument("--column", help="variable column")
        estimate.add_argument("--factor", help="factor column")
        estimate.add_argument("--wealth", help="portfolio column")
        estimate.add_argument("--claim", help="claim column for upper-price")
        estimate.add_argument("--candidate", action="append", default=[], help="hedge P&L column (repeatable)")
        estimate.add_argument("--measure", action="append", default=[], help=GROUP_FORMS)
        estimate.add_argument("--alpha", type=int)
        estimate.add_argument("--beta", type=int)
        estimate.add_argument("--bins", type=int)
        estimate.add_argument("--resamples", type=int)
        estimate.add_argument("--seed", type=int)

        convolve = commands.add_parser("convolve", help="convolution of Weighted V@Rs")
        convolve.add_argument("--group", action="append", required=True, help=GROUP_FORMS)
        convolve.add_argument("--majorant", action="store_true", help="also report the minimal concave majorant")
        return parser

    @staticmethod
    def _add_scenario_args(parser: argparse.ArgumentParser) -> None:
        parser.add_argument("--scenarios", required=True, help="scenario file (JSON or CSV)")
        parser.add_argument("--format", choices=["json", "csv"])

    def _add_market_args(self, parser: argparse.ArgumentParser) -> None:
        self._add_scenario_args(parser)
        parser.add_argument("--asset", action="append", default=[], help="traded asset column (repeatable)")
        parser.add_argument("--group", action="append", required=True, help=GROUP_FORMS)
        parser.add_argument("--box", help="position bounds LO:HI for every asset")

    def configure(self, args: argparse.Namespace) -> None:
        """Load settings, apply command-line overrides and set up logging"""
        if args.threads is not None and args.threads < 1:
            raise UsageError("--threads must be positive")
        self.config = Config(args.config, environ=self.environ)
        self.config.update({
            "threads": args.threads,
            "log_level": args.log_level,
            "log_file": args.log_file,
        })
        self.output = args.output
        Logger(level=self.config.get("log_level"), log_file=self.config.get("log_file"))

    def emit(self, payload: Dict[str, Any]) -> None:
        self.emit_text(dumps_json(payload, int(self.config.get("precision", 12))) + "\n")

    def emit_text(self, text: str) -> None:
        if self.output:
            write_text(self.output, text)
        else:
            self.stdout.write(text)

    def report_error(self, error: CoherentDealError) -> None:
        """One-line JSON error report on stderr"""
        self.stderr.write(dumps_json(error.to_dict(), None) + "\n")

    def run(self, argv: List[str]) -> int:
        """
        Run one command

        Args:
            argv: command-line arguments without the program name

        Returns:
            Exit code: 0 success, 2 usage, 3 data, 4 NSAO violated, 5 numerical
        """
        try:
            args = self.parser.parse_args(argv)
            self.configure(args)
            handler = getattr(self, "cmd_" + args.command.replace("-", "_"))
            handler(args)
            return 0
        except CoherentDealError as e:
            logger.debug("Command failed: %s", e.message)
            self.report_error(e)
            return e.exit_code
        except SystemExit as e:
            # --help and --version
            return int(e.code or 0)
        except OSError as e:
            error = CoherentDealError(f"I/O error: {e}")
            self.report_error(error)
            return error.exit_code

    def load_market(
        self,
        args: argparse.Namespace,
        exclude: Tuple[Optional[str], ...] = ()
    ) -> Tuple[ScenarioSpace, Dict[str, RandomVariable], MarketModel, List[ValuationGroup]]:
        """
        Scenario file, market model and valuation groups from the common flags

        Assets default to every column not named in `exclude`.
        """
        space, columns = load_scenarios(args.scenarios, args.format)
        names = args.asset or [name for name in columns if name not in exclude]
        assets = {name: _column(columns, name, "asset") for name in names}
        constraint = parse_box(args.box, len(assets)) if args.box else PositionConstraint.cone()
        market = MarketModel(space, assets, constraint)
        grid = int(self.config.get("grid_size", 200))
        groups = [parse_group(text, space, columns, grid) for text in args.group]
        logger.info("Market with %d scenarios, assets %s, %d groups", space.size, names, len(groups))
        return space, columns, market, groups

    def cmd_risk(self, args: argparse.Namespace) -> None:
        space, columns = load_scenarios(args.scenarios, args.format)
        variable = _column(columns, args.variable, "variable")
        measure = parse_measure(args.measure, int(self.config.get("grid_size", 200)))
        payload: Dict[str, Any] = {"kind": args.kind, "variable": args.variable}
        if args.kind == "wvar":
            payload["risk"] = rho_wvar(measure, variable)
        elif args.kind == "factor":
            if not args.factor:
                raise UsageError("--kind factor needs at least one --factor")
            factors = [_column(columns, name, "factor") for name in args.factor]
            payload["risk"] = multi_factor_risk(measure, variable, factors)
        else:
            wealth = _column(columns, args.wealth, "wealth")
            if args.kind == "contribution":
                extreme = extreme_measure(measure, wealth)
                payload["risk"] = risk_contribution(measure, variable, wealth)
                payload["unique"] = extreme.unique
                payload["measure"] = extreme.masses.tolist()
            else:
                if len(args.factor) != 1:
                    raise UsageError("--kind factor-contribution needs exactly one --factor")
                factor = _column(columns, args.factor[0], "factor")
                payload["risk"] = factor_risk_contribution(measure, variable, factor, wealth)
        self.emit(payload)

    def cmd_price(self, args: argparse.Namespace) -> None:
        _, columns, market, groups = self.load_market(args, exclude=(args.claim,))
        claim = _column(columns, args.claim, "claim")
        tolerance = float(self.config.get("lp_tolerance", 1e-9))
        cap = int(self.config.get("bruteforce_cap", 14))
        interval = price_interval(market, groups, claim, args.mode, tolerance, cap)
        payload = interval.to_dict()
        if args.oracle:
            upper = dual_bruteforce(market, groups, claim, "upper", args.mode, cap, tolerance)
            lower = dual_bruteforce(market, groups, claim, "lower", args.mode, cap, tolerance)
            gap = max(abs(upper - interval.upper), abs(lower - interval.lower))
            payload["oracle"] = {
                "primal": [interval.lower, interval.upper],
                "dual": [lower, upper],
                "agree": bool(gap <= ORACLE_TOLERANCE * (1.0 + abs(upper))),
            }
        self.emit(payload)

    def cmd_ftap(self, args: argparse.Namespace) -> None:
        _, _, market, groups = self.load_market(args)
        result = nsao_check(
            market,
            groups,
            args.mode,
            float(self.config.get("lp_tolerance", 1e-9)),
            int(self.config.get("bruteforce_cap", 14))
        )
        if not result.holds:
            raise NsaoViolation("NSAO violated", certificate=result.certificate)
        self.emit(result.to_dict())

    def cmd_superrep(self, args: argparse.Namespace) -> None:
        _, columns, market, groups = self.load_market(args, exclude=(args.claim,))
        claim = _column(columns, args.claim, "claim")
        plan = superrep_split(market, groups, claim, float(self.config.get("lp_tolerance", 1e-9)))
        self.emit(plan.to_dict())

    def cmd_liquidity(self, args: argparse.Namespace) -> None:
        if not args.box:
            raise UsageError("liquidity needs --box")
        _, columns, market, groups = self.load_market(args, exclude=(args.claim,))
        claim = _column(columns, args.claim, "claim")
        points = liquidity_curve(
            market,
            groups,
            claim,
            parse_volumes(args.volumes),
            self.config.threads,
            float(self.config.get("lp_tolerance", 1e-9))
        )
        digits = int(self.config.get("precision", 12))
        self.emit_text(csv_text(["v", "upper", "lower"], (p.to_row() for p in points), digits))

    def cmd_delta(self, args: argparse.Namespace) -> None:
        _, columns, market, groups = self.load_market(args, exclude=(args.xi,))
        xi = _column(columns, args.xi, "xi")
        if args.payoff == "call":
            if args.spot is None:
                raise UsageError("--payoff call needs --spot")
            derivative = call_delta_payoff(args.spot, args.strike, args.rate, args.expiry, xi)
        else:
            if not args.schedule:
                raise UsageError("--payoff bond needs --schedule")
            cashflows, expiry_shape = load_schedule(args.schedule)
            derivative = bond_option_delta_payoff(args.rate, args.strike, args.expiry, cashflows, expiry_shape, xi)
        interval = delta_interval(market, groups, derivative, args.mode, float(self.config.get("lp_tolerance", 1e-9)))
        payload = interval.to_dict()
        payload["derivative"] = derivative.values.tolist()
        self.emit(payload)

    def cmd_estimate(self, args: argparse.Namespace) -> None:
        samples = load_samples(args.samples)
        grid = int(self.config.get("grid_size", 200))
        measures = [parse_measure(text, grid) for text in args.measure]
        resamples = args.resamples if args.resamples is not None else int(self.config.get("resamples", 10000))
        seed = args.seed if args.seed is not None else int(self.config.get("seed", 12345))
        payload: Dict[str, Any] = {"estimator": args.estimator}

        if args.estimator in ("alphavar", "betavar"):
            if args.alpha is None:
                raise UsageError(f"{args.estimator} needs --alpha")
            column = _column(samples, args.column, "sample")
            if args.estimator == "alphavar":
                result = est_alpha_var(column, args.alpha, resamples, seed, self.config.threads)
            else:
                if args.beta is None:
                    raise UsageError("betavar needs --beta")
                result = est_beta_var(column, args.alpha, args.beta, resamples, seed, self.config.threads)
            payload.update(estimate=result.estimate, std_error=result.std_error, resamples=resamples, seed=seed)
            self.emit(payload)
            return

        if not measures:
            raise UsageError(f"{args.estimator} needs --measure")
        if args.estimator == "upper-price":
            claim = _column(samples, args.claim, "claim")
            candidates = [_column(samples, name, "candidate") for name in args.candidate]
            payload["estimate"] = est_upper_price(claim, candidates, measures)
            self.emit(payload)
            return

        measure = measures[0]
        column = _column(samples, args.column, "sample")
        if args.estimator == "wvar":
            payload["estimate"] = est_wvar(column, measure)
        elif args.estimator == "contribution":
            wealth = _column(samples, args.wealth, "wealth")
            result = est_risk_contribution(np.column_stack([column, wealth]), measure)
            payload.update(estimate=result.value, unique=result.unique)
        else:
            if args.bins is None:
                raise UsageError(f"{args.estimator} needs --bins")
            factor = _column(samples, args.factor, "factor")
            if args.estimator == "factor":
                payload["estimate"] = est_factor_risk(np.column_stack([column, factor]), measure, args.bins)
            else:
                wealth = _column(samples, args.wealth, "wealth")
                result = est_factor_risk_contribution(np.column_stack([column, factor, wealth]), measure, args.bins)
                payload.update(estimate=result.value, unique=result.unique)
        self.emit(payload)

    def cmd_convolve(self, args: argparse.Namespace) -> None:
        grid = int(self.config.get("grid_size", 200))
        measures = [parse_measure(text, grid) for text in args.group]
        combined = convolve_wvar(measures)
        payload: Dict[str, Any] = {
            "measure": measure_payload(combined),
            "distortion": distortion(combined).to_dict(),
        }
        if args.majorant:
            majorant = minimal_concave_majorant([distortion(m) for m in measures])
            payload["majorant"] = {
                "measure": measure_payload(weighting_measure(majorant)),
                "distortion": majorant.to_dict(),
            }
        self.emit(payload)
