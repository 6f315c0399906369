from dataclasses import dataclass, field
from math import inf, log
from time import perf_counter
from typing import Any, Callable

import numpy as np
from PySide6.QtCore import QObject, Signal, qWarning

from catising import __version__, cavity_models, ising_kmc, meanfield
from catising.config import BETA_C, ORACLE_BALANCE_TOL, ORACLE_TV_TOL
from catising.errors import ValidationError
from catising.experiment import SCHEMAS, ExperimentSpec, Kind
from catising.utils import linear_fit, stream_seed


@dataclass
class ResultRecord:
    spec: ExperimentSpec
    columns: tuple[str, ...]
    rows: list[tuple]
    extras: dict[str, Any] = field(default_factory=dict)
    wall_time: float = 0.0
    version: str = __version__


class Runner(QObject):
    status_update = Signal(str)

    def __init__(self):
        super().__init__()
        self._dispatch: dict[Kind, Callable[[ExperimentSpec], ResultRecord]] = {
            Kind.ISING_MEMORY: self._ising_memory,
            Kind.CAVITY_STEADY: self._cavity_steady,
            Kind.GAP_SCAN: self._gap_scan,
            Kind.TOY_FIDELITY: self._toy_fidelity,
            Kind.MEANFIELD_PHASE: self._meanfield_phase,
            Kind.ORACLE_CHECK: self._oracle_check,
            Kind.TOOM_DEMO: self._toom_demo,
        }

    def run(self, spec: ExperimentSpec) -> ResultRecord:
        self.status_update.emit(f"Running {spec.kind.value} (seed {spec.seed}, {spec.workers} workers).")
        began = perf_counter()
        record = self._dispatch[spec.kind](spec)
        record.wall_time = perf_counter() - began
        self.status_update.emit(
            f"Finished {spec.kind.value}: {len(record.rows)} rows in {record.wall_time:.2f} s."
        )
        return record

    def sweep(self, spec: ExperimentSpec, axis: str, values: list) -> ResultRecord:
        """One run per value. Run k uses stream k of the master seed."""
        schema = SCHEMAS[spec.kind]
        if axis not in schema or not schema[axis].sweepable:
            sweepable = [k for k, p in schema.items() if p.sweepable]
            raise ValidationError([f"'{axis}' is not sweepable for {spec.kind.value} (try {sweepable})"])
        if not values:
            raise ValidationError(["sweep needs at least one value"])
        param = schema[axis]
        problems = []
        if param.type == "int":
            cast = []
            for v in values:
                if float(v) != int(float(v)):
                    problems.append(f"'{axis}' takes integers, got {v}")
                cast.append(int(float(v)))
            values = cast
        else:
            values = [float(v) for v in values]
        if problems:
            raise ValidationError(problems)

        began = perf_counter()
        records = []
        for k, value in enumerate(values):
            entry = [value] if param.type == "floats" else value
            self.status_update.emit(f"Sweep {axis} = {value} ({k + 1}/{len(values)}).")
            records.append(self.run(spec.with_parameter(axis, entry, seed=stream_seed(spec.seed, k))))

        columns = records[0].columns
        prepend = axis not in columns
        rows = [
            ((value,) if prepend else ()) + row
            for value, record in zip(values, records)
            for row in record.rows
        ]
        extras: dict[str, Any] = {"sweep_axis": axis, "sweep_values": values}
        if spec.kind is Kind.ISING_MEMORY and axis == "M":
            extras.update(_decay_fit(records))
        return ResultRecord(
            spec,
            ((axis,) if prepend else ()) + columns,
            rows,
            extras,
            perf_counter() - began,
        )

    def _ising_memory(self, spec: ExperimentSpec) -> ResultRecord:
        p = spec.parameters
        result = ising_kmc.memory_experiment(
            p["M"],
            p["beta"],
            p["kappa"],
            p["n_traj"],
            spec.seed,
            t_final=p["T"],
            decoder=p["decoder"],
            initial=p["initial"],
            workers=spec.workers,
        )
        row = (
            result.M,
            result.beta,
            p["kappa"],
            result.T,
            result.n_traj,
            result.decoder,
            result.success_prob,
            result.stderr,
        )
        columns = ("M", "beta", "kappa", "T", "n_traj", "decoder", "success_prob", "stderr")
        return ResultRecord(spec, columns, [row], {"ordered_phase": p["beta"] > BETA_C})

    def _cavity_steady(self, spec: ExperimentSpec) -> ResultRecord:
        p = spec.parameters
        points = cavity_models.steady_overlap_scan(
            p["model"],
            p["N"],
            p["kappa1"],
            p["kappa2"],
            method=p["method"],
            t_settle=p["t_settle"],
            check_cutoff=p["check_cutoff"],
            workers=spec.workers,
        )
        rows = [(p["model"], q.N, q.kappa1, p["kappa2"], q.overlap, q.n_max) for q in points]
        return ResultRecord(spec, ("model", "N", "kappa1", "kappa2", "overlap", "n_max"), rows)

    def _gap_scan(self, spec: ExperimentSpec) -> ResultRecord:
        p = spec.parameters
        scan = cavity_models.gap_scan(
            p["model"],
            p["N"],
            p["kappa1"],
            p["kappa2"],
            check_cutoff=p["check_cutoff"],
            workers=spec.workers,
        )
        rows = [
            (p["model"], float(N), p["kappa1"], p["kappa2"], float(gap))
            for N, gap in zip(scan.N_values, scan.gaps)
        ]
        extras = {"gap_fit": scan.fit._asdict()}
        return ResultRecord(spec, ("model", "N", "kappa1", "kappa2", "gap"), rows, extras)

    def _toy_fidelity(self, spec: ExperimentSpec) -> ResultRecord:
        p = spec.parameters
        points = cavity_models.toy_fidelity_experiment(
            p["N"],
            p["kappa2"],
            p["kappa1"],
            p["kappad"],
            p["kappann"],
            p["T_noisy"],
            p["T_recovery"],
            keep_neighbour=p["recovery_mode"] == "keep_knn",
            check_cutoff=p["check_cutoff"],
            workers=spec.workers,
        )
        rows = [
            (q.N, p["kappa1"], p["kappad"], p["kappann"], p["recovery_mode"], q.fidelity, q.codespace_weight, q.n_max)
            for q in points
        ]
        toy = meanfield.toy_fixed_point(
            meanfield.MFInputs(p["kappa1"], p["kappad"], p["kappann"], kappa2=p["kappa2"])
        )
        extras = {"meanfield_plateau": (1 + toy.Z_exp) / 2, "T_noisy": p["T_noisy"], "T_recovery": p["T_recovery"]}
        columns = ("N", "kappa1", "kappad", "kappann", "recovery_mode", "fidelity", "codespace_weight", "n_max")
        return ResultRecord(spec, columns, rows, extras)

    def _meanfield_phase(self, spec: ExperimentSpec) -> ResultRecord:
        p = spec.parameters
        diagram = meanfield.phase_diagram(
            np.linspace(p["kappa1_min"], p["kappa1_max"], p["n_kappa1"]),
            np.linspace(p["kappad_min"], p["kappad_max"], p["n_kappad"]),
            p["kappann"],
            p["lam"],
            p["kappa2"],
            diagonal=p["diagonal"],
        )
        extras = {"ordering_holds": diagram.ordering_holds()}
        return ResultRecord(spec, ("kappa1", "kappad", "Q_sq", "alpha_sq", "phase"), list(diagram.rows()), extras)

    def _oracle_check(self, spec: ExperimentSpec) -> ResultRecord:
        p = spec.parameters
        rows = []
        for beta in p["beta"]:
            rates = ising_kmc.rates_from_beta(beta, p["kappa"])
            tv = ising_kmc.exact_stationary(p["M"], rates, tol=inf).tv_distance
            balance = ising_kmc.detailed_balance_error(rates)
            passed = tv < ORACLE_TV_TOL and balance < ORACLE_BALANCE_TOL
            if not passed:
                qWarning(f"oracle check failed at beta = {beta}: TV {tv:.2e}, balance {balance:.2e}")
            rows.append((p["M"], beta, tv, balance, passed))
        return ResultRecord(spec, ("M", "beta", "tv_distance", "detailed_balance_error", "passed"), rows)

    def _toom_demo(self, spec: ExperimentSpec) -> ResultRecord:
        p = spec.parameters
        M, size = p["M"], 1 if p["island"] == "single" else 2
        rows = []
        for index in range(M * M):
            row, col = divmod(index, M)
            spins = np.zeros((M, M), dtype=np.int64)
            for di in range(size):
                for dj in range(size):
                    spins[(row + di) % M, (col + dj) % M] = 1
            config = ising_kmc.SpinConfig(spins)
            steps = -1
            for step in range(p["max_steps"] + 1):
                if config.up_count == 0:
                    steps = step
                    break
                config = ising_kmc.toom_step(
                    config, p["flip_prob"], stream_seed(stream_seed(spec.seed, index), step)
                )
            rows.append((M, p["island"], row, col, steps, config.up_count))
        return ResultRecord(spec, ("M", "island", "row", "col", "steps", "final_up"), rows)


def _decay_fit(records: list[ResultRecord]) -> dict[str, Any]:
    """Exponent of 1 - p ~ e^{-gamma M}, fitted where p < 1."""
    pairs = [(row[0], row[6]) for record in records for row in record.rows if row[6] < 1]
    if len(pairs) < 2:
        return {}
    fit = linear_fit([M for M, _ in pairs], [log(1 - p) for _, p in pairs])
    return {"decay_gamma": -fit.slope, "decay_fit": fit._asdict()}
