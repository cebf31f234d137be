"""Config-driven command-line surface.

Four subcommands assemble the library into reproducible experiments:

* ``gauss``        brute-force vs closed-form Gauss sums over a grid;
* ``sign``         the normalized sign of a stratum plus its invariance suite;
* ``reducibility`` oracle coefficients, Hecke data and reducibility points;
* ``base-change``  the tame base-change datum with its covariance checks.

Experiments are selected either with ``--case <name>`` (one of the built-in
desk instances) or with a JSON config file (schema_version 1; unknown keys
are errors).  ``--json <path>`` writes the machine-readable payload; the
process exits 0 only if every internal cross-check passed.
"""

from __future__ import annotations

import argparse
import json
import random
import sys
from dataclasses import dataclass, field

from .finite_field import AddChar, MultChar, get_field, pow_fq
from .gauss import QuadSpace, gauss_sum_brute, gauss_sum_closed
from .hecke_bc import (
    HeckeParams,
    LevelZeroChar,
    base_change,
    normalized_spectrum,
    rechoice_covariance,
    solve_reducibility,
)
from .local_model import TowerConfig, build_tower, iwahori_indices
from .stratum import (
    BUILTIN_CASE_NAMES,
    StratumSpec,
    builtin_case,
    by_oracle,
    bz_oracle,
    default_chars,
    epsilon_z_invariance,
)


class ConfigError(ValueError):
    pass


_TOP_KEYS = {"schema_version", "case", "tower", "stratum", "character", "run"}
_TOWER_KEYS = {"q", "e", "f", "d", "N", "levels", "u"}
_STRATUM_KEYS = {"c"}
_CHAR_KEYS = {"rho_sign", "rho_signs", "mu_power", "psi_twist", "bhat"}
_RUN_KEYS = {"bound", "threads", "seed", "sample", "grid_q", "grid_n",
             "grid_count"}


def _check_keys(block: dict, allowed: set, where: str):
    bad = set(block) - allowed
    if bad:
        raise ConfigError(f"unknown keys in {where}: {sorted(bad)}")


@dataclass
class ExperimentConfig:
    """Validated experiment description: tower + stratum + character + run."""

    case: str | None = None
    tower: dict = field(default_factory=dict)
    stratum: dict = field(default_factory=dict)
    character: dict = field(default_factory=dict)
    run: dict = field(default_factory=dict)

    @staticmethod
    def from_dict(data: dict) -> "ExperimentConfig":
        _check_keys(data, _TOP_KEYS, "config")
        if data.get("schema_version") != 1:
            raise ConfigError("config must declare schema_version: 1")
        cfg = ExperimentConfig(
            case=data.get("case"),
            tower=dict(data.get("tower", {})),
            stratum=dict(data.get("stratum", {})),
            character=dict(data.get("character", {})),
            run=dict(data.get("run", {})),
        )
        _check_keys(cfg.tower, _TOWER_KEYS, "tower block")
        _check_keys(cfg.stratum, _STRATUM_KEYS, "stratum block")
        _check_keys(cfg.character, _CHAR_KEYS, "character block")
        _check_keys(cfg.run, _RUN_KEYS, "run block")
        if cfg.case is None and not cfg.tower:
            raise ConfigError("config needs either a case or a tower block")
        if cfg.case is not None and cfg.case not in BUILTIN_CASE_NAMES:
            raise ConfigError(
                f"unknown case {cfg.case!r}; choose from {BUILTIN_CASE_NAMES}"
            )
        return cfg

    @staticmethod
    def load(path: str) -> "ExperimentConfig":
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return ExperimentConfig.from_dict(data)

    def build_stratum(self) -> StratumSpec:
        """Re-runs every tower/stratum constraint on the loaded data."""
        if self.case is not None:
            return builtin_case(self.case)
        t = self.tower
        levels = t.get("levels")
        if levels is not None:
            levels = tuple(tuple(x) for x in levels)
        tower = build_tower(TowerConfig(
            q=t["q"], e=t["e"], f=t["f"], d=t.get("d", 0),
            N=t.get("N"), levels=levels, u=t.get("u", 1),
        ))
        c_data = self.stratum.get("c")
        if not c_data:
            raise ConfigError("stratum block needs a nonempty c list")
        c_elems = [
            tower.e_monomial(int(expo), pow_fq(tower.zeta, int(zp)))
            for zp, expo in c_data
        ]
        return StratumSpec(tower, c_elems)


def _stratum_provenance(s: StratumSpec, psi_twist: int) -> dict:
    """The exact choices a sign depends on, for the results payload."""
    tower = s.tower
    return {
        "uniformizer": "w_E",
        "u": list(tower.u.coeffs),
        "psi_twist": psi_twist,
        "c": [
            {"exponent": c.val(), "coeff": list(c.coeff(c.val()).coeffs)}
            for c in s.c_elems
        ],
    }


def _table(rows: list[dict], columns: list[str]) -> str:
    widths = {
        c: max([len(c)] + [len(str(r.get(c, ""))) for r in rows])
        for c in columns
    }
    head = "  ".join(c.ljust(widths[c]) for c in columns)
    sep = "  ".join("-" * widths[c] for c in columns)
    body = [
        "  ".join(str(r.get(c, "")).ljust(widths[c]) for c in columns)
        for r in rows
    ]
    return "\n".join([head, sep] + body)


def _emit(payload: dict, json_path: str | None):
    if json_path:
        with open(json_path, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True, default=str)
            fh.write("\n")


# ---------------------------------------------------------------------------
# gauss


def cmd_gauss(cfg: ExperimentConfig, args) -> int:
    run = cfg.run
    grid_q = run.get("grid_q", [3, 5])
    grid_n = run.get("grid_n", 3)
    count = run.get("grid_count", 5)
    seed = args.seed if args.seed is not None else run.get("seed", 0)
    rng = random.Random(seed)
    rows = []
    ok = True
    for q in grid_q:
        k = get_field(q, 1)
        psi = AddChar(k, 1)
        # n = 0: the empty sum over a point is 1
        rows.append({"q": q, "n": 0, "status": "sum=1 sign=+1"})
        for n in range(1, grid_n + 1):
            for _ in range(count):
                gram = [[rng.randrange(q) for _ in range(n)]
                        for _ in range(n)]
                gram = [[(gram[i][j] + gram[j][i]) % q for j in range(n)]
                        for i in range(n)]
                space = QuadSpace.from_ints(k, gram)
                if not space.is_nondegenerate():
                    rows.append({"q": q, "n": n, "status": "degenerate"})
                    continue
                brute = gauss_sum_brute(space, psi, bound=args.bound,
                                        threads=args.threads)
                closed = gauss_sum_closed(space, psi)
                match = brute == closed
                ok = ok and match
                rows.append({
                    "q": q, "n": n,
                    "status": "match" if match else "MISMATCH",
                })
    print(_table(rows, ["q", "n", "status"]))
    summary = "all-match" if ok else "MISMATCH"
    print(f"gauss cross-validation: {summary}")
    _emit({"command": "gauss", "seed": seed, "rows": rows, "ok": ok},
          args.json)
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# sign


def cmd_sign(cfg: ExperimentConfig, args) -> int:
    s = cfg.build_stratum()
    twist = cfg.character.get("psi_twist", 1)
    psi = AddChar(s.tower.k, twist)
    report = epsilon_z_invariance(s, psi, threads=args.threads)
    base = report["base"]
    rows = [{"check": "base sign", "value": base.value,
             "ok": base.value in (-1, 1)}]
    for r in report["psi_twists"]:
        rows.append({"check": f"psi twist {r['twist']}",
                     "value": r["sign"], "ok": r["matches"]})
    for r in report["uniformizer"]:
        rows.append({"check": f"uniformizer unit {r['unit']}",
                     "value": r["sign"], "ok": r["matches"]})
    print(_table(rows, ["check", "value", "ok"]))
    ok = report["ok"] and base.value in (-1, 1)
    print(f"sign suite: {'pass' if ok else 'FAIL'} (epsilon = {base.value})")
    payload = {
        "command": "sign",
        "epsilon": base.value,
        "fourth_root": base.fourth_root,
        "space_size": base.space_size,
        "provenance": _stratum_provenance(s, twist),
        "rows": rows,
        "ok": ok,
    }
    _emit(payload, args.json)
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# reducibility


def _fmt_points(rep) -> str:
    real = sorted(rep.real_points)
    shifted = sorted(rep.shifted_points)
    parts = [str(x) for x in real]
    parts += [f"{x} + {rep.imag_token}" if x else rep.imag_token
              for x in shifted]
    return "{" + ", ".join(parts) + "}"


def cmd_reducibility(cfg: ExperimentConfig, args) -> int:
    s = cfg.build_stratum()
    tower = s.tower
    qE = tower.kE.q
    seed = args.seed if args.seed is not None else cfg.run.get("seed", 0)
    sample = cfg.run.get("sample")
    chars = default_chars(s)
    by_val = by_oracle(s, chars, (1, 1), sample=sample, seed=seed).as_int()
    half = (qE - 1) // 2
    mu_lo = MultChar(tower.kE, half * (tower.f - 1))
    mu_hi = MultChar(tower.kE, half * tower.f)
    bz_lo = bz_oracle(s, chars, mu_lo, sample=sample, seed=seed,
                      threads=args.threads).as_int()
    bz_hi = bz_oracle(s, chars, mu_hi, sample=sample, seed=seed,
                      threads=args.threads).as_int()
    c_y, c_z = iwahori_indices(tower, s)
    eps_y = 1 if by_val > 0 else -1
    eps_z = 1 if bz_lo > 0 else -1
    hp = HeckeParams(qE, 1, 1, c_y, c_z, eps_y=eps_y, eps_z=eps_z,
                     b_y=by_val, b_z=bz_lo)
    hp0 = HeckeParams(qE, 1, 0, c_y, c_z, b_z=bz_hi)
    spec = normalized_spectrum(hp)
    rho = LevelZeroChar(tower.kE, MultChar(tower.kE, half), side="u")
    rows = []
    reports = {}
    for label, varpi in [("matched", rho.minus_one() * eps_z),
                         ("twisted", -rho.minus_one() * eps_z)]:
        rt = LevelZeroChar(tower.kE, mu_lo, varpi_value=varpi, side="gl")
        rep = solve_reducibility(hp, rt, rho, eps_z)
        reports[label] = rep
        rows.append({"candidate": label, "branch": rep.branch,
                     "points": _fmt_points(rep)})
    swap = (reports["matched"].real_points
            == reports["twisted"].shifted_points
            and reports["matched"].shifted_points
            == reports["twisted"].real_points)
    ok = (by_val != 0 and bz_hi == 0 and bz_lo != 0
          and spec == {"y": (-1, qE), "z": (-1, qE)} and swap)
    print(_table(rows, ["candidate", "branch", "points"]))
    print(f"b_y = {by_val}, b_z(chi^(f-1)) = {bz_lo}, "
          f"b_z(chi^f) = {bz_hi}")
    print(f"normalized spectra: {spec}")
    print(f"reducibility suite: {'pass' if ok else 'FAIL'}")
    payload = {
        "command": "reducibility",
        "b_y": by_val, "b_z_low": bz_lo, "b_z_high": bz_hi,
        "c_y": c_y, "c_z": c_z,
        "spectra": {w: list(v) for w, v in spec.items()},
        "spectrum_rank0_z": list(normalized_spectrum(hp0)["z"]),
        "candidates": rows,
        "provenance": _stratum_provenance(s, 1),
        "ok": ok,
    }
    _emit(payload, args.json)
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# base-change


def cmd_base_change(cfg: ExperimentConfig, args) -> int:
    s = cfg.build_stratum()
    tower = s.tower
    twist = cfg.character.get("psi_twist", 1)
    psi = AddChar(tower.k, twist)
    report = epsilon_z_invariance(s, psi, threads=args.threads)
    eps = report["base"]
    half = (tower.kE.q - 1) // 2
    rows = []
    ok = report["ok"]
    for exp in (0, half):
        rho = LevelZeroChar(tower.kE, MultChar(tower.kE, exp), side="u")
        rt = base_change(rho, eps, tower)
        cov = rechoice_covariance(rt, rho, report, tower)
        ok = ok and cov
        rows.append({
            "rho(-1)": rho.minus_one(),
            "mu_power": rt.mu_part.exponent,
            "varpi_E": rt.varpi_value.as_int(),
            "varpi_F": rt.varpi_F_value(tower).as_int(),
            "rechoice": "ok" if cov else "FAIL",
        })
    print(_table(rows, ["rho(-1)", "mu_power", "varpi_E", "varpi_F",
                        "rechoice"]))
    print(f"base-change suite: {'pass' if ok else 'FAIL'} "
          f"(epsilon = {eps.value})")
    payload = {
        "command": "base-change",
        "epsilon": eps.value,
        "rows": rows,
        "provenance": _stratum_provenance(s, twist),
        "ok": ok,
    }
    _emit(payload, args.json)
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="strbc",
        description="Exact Gauss-sum signs, Hecke data and base change "
                    "for strongly ramified towers.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in [("gauss", cmd_gauss), ("sign", cmd_sign),
                     ("reducibility", cmd_reducibility),
                     ("base-change", cmd_base_change)]:
        p = sub.add_parser(name)
        p.add_argument("config", nargs="?", help="JSON config file")
        p.add_argument("--case", choices=BUILTIN_CASE_NAMES,
                       help="built-in desk instance")
        p.add_argument("--bound", type=int, default=10**7,
                       help="enumeration cap")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--seed", type=int, default=None,
                       help="seed for randomized sampling")
        p.add_argument("--json", metavar="PATH",
                       help="write machine-readable results")
        p.set_defaults(fn=fn)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.case is not None:
            cfg = ExperimentConfig.from_dict(
                {"schema_version": 1, "case": args.case}
            )
        elif args.config is not None:
            cfg = ExperimentConfig.load(args.config)
        elif args.fn is cmd_gauss:
            cfg = ExperimentConfig.from_dict(
                {"schema_version": 1, "case": "u1"}
            )
        else:
            print("error: need a config file or --case", file=sys.stderr)
            return 2
        return args.fn(cfg, args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
