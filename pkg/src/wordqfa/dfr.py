"""Distinguishing families of representations: tau models, named constructions,
combinators and certification over Cayley balls."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Sequence

import mpmath

from .envelopes import EnvelopeError, fit_exp_envelope, fit_power_envelope
from .exact import Exact, exact_root_of_unity
from .groups import (CosetTable, GroupPresentation, abelian_group, cyclic_group, direct_product,
                     direct_product_of_frees, enumerate_ball, free_abelian_group, free_group,
                     free_product_z_zr, trivial_group, virtual_overgroup)
from .linalg import (BIGFLOAT, DEFAULT_PRECISION, DEFAULT_TOLERANCE, EXACT, AmplitudeClass,
                     Matrix, ToleranceProfile, join_class)
from .reps import (UnitaryRep, character_gap, direct_sum_reps, eval_rep, extend_rep, induce_rep,
                   pad_rep, restrict_rep, trivial_rep)

SAFETY_FACTOR = 0.5
SHAPES = ("PolyLower", "ExpLower", "Constant")


class DfrError(ValueError):
    pass


# ---------------------------------------------------------------------------
# tau models


@dataclass(frozen=True)
class TauModel:
    """kind in PolyLower, ExpLower, Constant, Calibrated, Unbounded.

    PolyLower: coefficient * n**(-exponent); ExpLower: base**(-n);
    Constant: constant.  Calibrated carries one of those shapes in ``shape``
    with constants fitted from a gap scan (``calibration`` holds the
    per-length minima).  Missing constants mean "shape only, not yet
    calibrated"."""

    kind: str
    coefficient: float | None = None
    exponent: float | None = None
    base: float | None = None
    constant: float | None = None
    shape: str | None = None
    fixed_exponent: float | None = None
    calibration: tuple = field(default=(), compare=False)
    radius: int | None = None

    KINDS = ("PolyLower", "ExpLower", "Constant", "Calibrated", "Unbounded")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown tau kind {self.kind!r}")
        if self.kind == "Calibrated" and self.shape not in SHAPES:
            raise ValueError("calibrated tau needs a PolyLower, ExpLower or Constant shape")

    @property
    def effective_shape(self) -> str:
        return self.shape if self.kind == "Calibrated" else self.kind

    @property
    def has_constants(self) -> bool:
        s = self.effective_shape
        if s == "PolyLower":
            return self.coefficient is not None and self.exponent is not None
        if s == "ExpLower":
            return self.base is not None
        if s == "Constant":
            return self.constant is not None
        return False

    @property
    def quantitative(self) -> bool:
        return self.kind != "Unbounded" and self.has_constants

    def value(self, n):
        if not self.quantitative:
            raise DfrError(f"tau model {self.describe()} has no numeric value")
        n = max(float(n), 1.0)
        s = self.effective_shape
        if s == "PolyLower":
            return self.coefficient * n ** (-self.exponent)
        if s == "ExpLower":
            return self.base ** (-n)
        return self.constant

    def poly_constants(self) -> tuple[float, float]:
        """(C1, C2) reading tau as C1 * n**(-C2); constants have exponent 0."""
        s = self.effective_shape
        if not self.quantitative or s not in ("PolyLower", "Constant"):
            raise DfrError("a polynomial tau with constants is required")
        if s == "Constant":
            return float(self.constant), 0.0
        return float(self.coefficient), float(self.exponent)

    def exp_base(self) -> float:
        s = self.effective_shape
        if not self.quantitative:
            raise DfrError("a calibrated tau is required")
        if s == "ExpLower":
            return float(self.base)
        raise DfrError("an exponential tau is required")

    def describe(self) -> str:
        s = self.effective_shape
        if self.kind == "Unbounded":
            return "Unbounded"
        prefix = "Calibrated " if self.kind == "Calibrated" else ""
        if not self.has_constants:
            return f"{prefix}{s}(uncalibrated)"
        if s == "PolyLower":
            return f"{prefix}PolyLower({self.coefficient:.6g} * n^-{self.exponent:.6g})"
        if s == "ExpLower":
            return f"{prefix}ExpLower({self.base:.6g}^-n)"
        return f"{prefix}Constant({self.constant:.6g})"

    def to_json(self) -> dict:
        params = {k: getattr(self, k) for k in ("coefficient", "exponent", "base", "constant",
                                                "shape", "fixed_exponent", "radius")
                  if getattr(self, k) is not None}
        return {"kind": self.kind, "params": params,
                "calibration": [[n, v] for n, v in self.calibration]}

    @classmethod
    def from_json(cls, data: dict) -> "TauModel":
        return cls(data["kind"], calibration=tuple((int(n), float(v)) for n, v in
                                                    data.get("calibration", ())),
                   **data.get("params", {}))


def poly_tau(coefficient=None, exponent=None, fixed_exponent=None) -> TauModel:
    return TauModel("PolyLower", coefficient, exponent, fixed_exponent=fixed_exponent)


def exp_tau(base=None) -> TauModel:
    return TauModel("ExpLower", base=base)


def constant_tau(c) -> TauModel:
    return TauModel("Constant", constant=float(c))


UNBOUNDED = TauModel("Unbounded")


def _pending(tau: TauModel) -> TauModel:
    """Same shape, constants dropped: the value must be recalibrated."""
    if tau.kind == "Unbounded":
        return tau
    return TauModel("Calibrated", shape=tau.effective_shape, fixed_exponent=tau.fixed_exponent)


def tau_min(a: TauModel, b: TauModel) -> TauModel:
    """A model bounded above by min(a, b) inside the shared shape."""
    if a.kind == "Unbounded" or b.kind == "Unbounded":
        return UNBOUNDED
    sa, sb = a.effective_shape, b.effective_shape
    known = a.quantitative and b.quantitative
    if sa == sb == "Constant":
        return constant_tau(min(a.constant, b.constant)) if known else _pending(a)
    if "ExpLower" in (sa, sb):
        if known and sa == sb:
            return exp_tau(max(a.base, b.base))
        if known and {sa, sb} == {"ExpLower", "Constant"}:
            e, c = (a, b) if sa == "ExpLower" else (b, a)
            base = max(e.base, 1.0 / min(c.constant, 1.0))
            return exp_tau(base)
        return TauModel("Calibrated", shape="ExpLower")
    fixed = None
    if a.fixed_exponent is not None and b.fixed_exponent is not None:
        fixed = max(a.fixed_exponent, b.fixed_exponent)
    elif sa == "Constant":
        fixed = b.fixed_exponent
    elif sb == "Constant":
        fixed = a.fixed_exponent
    if known:
        c1a, c2a = a.poly_constants()
        c1b, c2b = b.poly_constants()
        return TauModel("PolyLower", min(c1a, c1b), max(c2a, c2b), fixed_exponent=fixed)
    return TauModel("Calibrated", shape="PolyLower", fixed_exponent=fixed)


# ---------------------------------------------------------------------------
# DFR type


@dataclass
class Dfr:
    group: GroupPresentation
    reps: tuple
    tau: TauModel
    diagonal: bool = False
    label: str = ""
    certified: bool = False
    certified_radius: int | None = None

    def __post_init__(self):
        self.reps = tuple(self.reps)
        if not self.reps:
            raise DfrError("a DFR needs at least one representation")
        d = self.reps[0].dim
        for rep in self.reps:
            if rep.group != self.group:
                raise DfrError("all representations must share the DFR's group")
            if rep.dim != d:
                raise DfrError("all representations must share one dimension")
        if self.diagonal and not all(m.is_diagonal() for rep in self.reps for m in rep.images):
            raise DfrError("diagonal flag set on non-diagonal images")

    @property
    def k(self) -> int:
        return len(self.reps)

    @property
    def d(self) -> int:
        return self.reps[0].dim

    @property
    def projective(self) -> bool:
        return any(rep.projective for rep in self.reps)

    @property
    def backend(self) -> str:
        return BIGFLOAT if any(rep.backend == BIGFLOAT for rep in self.reps) else EXACT

    @property
    def amplitude_class(self) -> AmplitudeClass:
        return join_class(*(rep.amplitude_class for rep in self.reps))

    def to_json(self) -> dict:
        return {
            "label": self.label,
            "group": self.group.to_json(),
            "k": self.k,
            "d": self.d,
            "diagonal": self.diagonal,
            "projective": self.projective,
            "tau": self.tau.to_json(),
            "certified": self.certified,
            "certified_radius": self.certified_radius,
            "amplitude_class": self.amplitude_class.label,
            "reps": [rep.to_json() for rep in self.reps],
        }

    @classmethod
    def from_json(cls, data: dict) -> "Dfr":
        group = GroupPresentation.from_json(data["group"])
        reps = [UnitaryRep.from_json(r, group) for r in data["reps"]]
        return cls(group, tuple(reps), TauModel.from_json(data["tau"]), bool(data["diagonal"]),
                   data.get("label", ""), bool(data.get("certified", False)),
                   data.get("certified_radius"))

    def structurally_equal(self, other: "Dfr") -> bool:
        return (self.group == other.group and self.reps == other.reps and self.tau == other.tau
                and self.diagonal == other.diagonal and self.certified == other.certified)


# ---------------------------------------------------------------------------
# named constructions


def gamma_matrix(phase_turns, backend: str, amplitude_class) -> Matrix:
    """diag(exp(2 pi i r), 1) for r given in turns (mpf) or as an exact entry."""
    if isinstance(phase_turns, Exact):
        return Matrix.diagonal([phase_turns, Exact.from_rational(1)], EXACT,
                               amplitude_class=amplitude_class)
    with mpmath.workprec(DEFAULT_PRECISION):
        z = mpmath.expjpi(2 * phase_turns)
    return Matrix.diagonal([z, mpmath.mpc(1)], BIGFLOAT, amplitude_class=amplitude_class)


def _zm_rep(group, m: int, gen_index: int = 0) -> UnitaryRep:
    if 24 % m == 0:
        mat = gamma_matrix(exact_root_of_unity(1, m), EXACT, AmplitudeClass.ALGEBRAIC_EXACT)
    else:
        with mpmath.workprec(DEFAULT_PRECISION):
            mat = gamma_matrix(mpmath.mpf(1) / m, BIGFLOAT, AmplitudeClass.ALGEBRAIC_NUMERIC)
    base = UnitaryRep(cyclic_group(m), [mat], label=f"gamma_1/{m}")
    return base if group is None else extend_rep(base, group, gen_index)


def zm_tau_constant(m: int) -> float:
    return 19 * math.pi ** 2 / (24 * m * m)


ZALG_ENTRY = Exact.from_rational(Fraction(3, 5), Fraction(4, 5))


def _zalg_rep() -> UnitaryRep:
    mat = gamma_matrix(ZALG_ENTRY, EXACT, AmplitudeClass.ALGEBRAIC_EXACT)
    return UnitaryRep(free_abelian_group(1), [mat], label="gamma_rhat")


def _first_primes(k: int) -> list[int]:
    out, p = [], 2
    while len(out) < k:
        if all(p % q for q in out if q * q <= p):
            out.append(p)
        p += 1
    return out


def nonalgebraic_k(delta: float) -> int:
    if not delta > 0:
        raise DfrError("delta must be positive")
    return 1 + int(math.floor(2 / delta))


def _znonalg_reps(delta: float) -> list[UnitaryRep]:
    k = nonalgebraic_k(delta)
    reps = []
    for p in _first_primes(k):
        with mpmath.workprec(DEFAULT_PRECISION):
            mat = gamma_matrix(mpmath.sqrt(p), BIGFLOAT, AmplitudeClass.CTILDE_NUMERIC)
        reps.append(UnitaryRep(free_abelian_group(1), [mat], label=f"gamma_sqrt{p}"))
    return reps


def f2_images() -> tuple[Matrix, Matrix]:
    s = Exact.sqrt(Fraction(1, 5))
    i = Exact.from_rational(0, 1)
    a = Matrix.diagonal([Exact.from_rational(2, 1) * s, Exact.from_rational(2, -1) * s], EXACT,
                        amplitude_class=AmplitudeClass.ALGEBRAIC_EXACT)
    b = Matrix([[Exact.from_rational(2) * s, i * s], [i * s, Exact.from_rational(2) * s]], EXACT,
               amplitude_class=AmplitudeClass.ALGEBRAIC_EXACT)
    return a, b


def _f2_rep() -> UnitaryRep:
    return UnitaryRep(free_group(2), list(f2_images()), label="rho_F2")


def free_subgroup_embedding(r: int) -> list[tuple]:
    """Words in F2 = <a, b> for a free basis of a rank-r subgroup."""
    if r < 1:
        raise DfrError("rank must be >= 1")
    if r == 1:
        return [(1,)]
    if r == 2:
        return [(1,), (2,)]
    return [(1,) * j + (2,) + (-1,) * j for j in range(1, r + 1)]


def tan_parameters(count: int) -> list[tuple[int, int, int]]:
    """(p, m, n) for the first primes p = 1 mod 4, p = m^2 + n^2 with m > n > 0."""
    out = []
    p = 5
    while len(out) < count:
        if p % 4 == 1 and all(p % q for q in range(2, int(p ** 0.5) + 1)):
            for n in range(1, int(p ** 0.5) + 1):
                m2 = p - n * n
                m = math.isqrt(m2)
                if m * m == m2 and m > n:
                    out.append((p, m, n))
                    break
        p += 1
    return out


def tan_matrix(p: int, m: int, n: int) -> Matrix:
    c = Fraction(m * m - n * n, p)
    s = Fraction(2 * m * n, p)
    return Matrix([[c, s], [-s, c]], EXACT, amplitude_class=AmplitudeClass.ALGEBRAIC_EXACT)


SHALEN_ALPHAS = {"sqrt2": 2, "sqrt3": 3, "sqrt5": 5, "sqrt7": 7}


def _shalen_alpha(alpha: str):
    key = alpha.replace("(", "").replace(")", "").replace(" ", "").lower()
    if key in SHALEN_ALPHAS:
        return mpmath.sqrt(SHALEN_ALPHAS[key])
    if key == "golden":
        return (1 + mpmath.sqrt(5)) / 2
    raise DfrError(f"alpha {alpha!r} is not a supported quadratic irrational")


def build_named_dfr(name: str, **params) -> Dfr:
    key = name.lower().replace("_", "").replace("-", "")
    if key == "trivial":
        g = trivial_group()
        return Dfr(g, (trivial_rep(g, 2),), constant_tau(2.0), True, "Trivial")
    if key == "zm":
        m = int(params.get("m", 0))
        if m < 2:
            raise DfrError("Zm needs m >= 2")
        g = cyclic_group(m)
        return Dfr(g, (_zm_rep(None, m),), constant_tau(zm_tau_constant(m)), True, f"Zm({m})")
    if key == "zalgebraic":
        rep = _zalg_rep()
        return Dfr(rep.group, (rep,), poly_tau(), True, "ZAlgebraic")
    if key == "znonalgebraic":
        delta = float(params.get("delta", 0.9))
        reps = _znonalg_reps(delta)
        return Dfr(reps[0].group, tuple(reps), poly_tau(fixed_exponent=delta), True,
                   f"ZNonAlgebraic({delta:g})")
    if key == "f2":
        rep = _f2_rep()
        return Dfr(rep.group, (rep,), exp_tau(), False, "F2")
    if key == "fr":
        r = int(params.get("r", 0))
        if r < 1:
            raise DfrError("Fr needs r >= 1")
        base = build_named_dfr("F2")
        if r == 2:
            return replace(base, label="Fr(2)")
        out = dfr_subgroup(base, free_group(r), free_subgroup_embedding(r))
        out.label = f"Fr({r})"
        return out
    if key in ("abelianalgebraic", "abeliannonalgebraic"):
        r = int(params.get("r", 0))
        moduli = tuple(int(m) for m in params.get("moduli", ()))
        if r < 0 or any(m < 2 for m in moduli) or r + len(moduli) == 0:
            raise DfrError("abelian DFR needs r >= 0, moduli >= 2 and at least one factor")
        nonalg = key == "abeliannonalgebraic"
        delta = float(params.get("delta", 0.9))
        factors = []
        for _ in range(r):
            factors.append(build_named_dfr("ZNonAlgebraic", delta=delta) if nonalg
                           else build_named_dfr("ZAlgebraic"))
        for m in moduli:
            factors.append(build_named_dfr("Zm", m=m))
        out = factors[0]
        for f in factors[1:]:
            out = dfr_product(out, f)
        # present the result on the canonical abelian presentation
        target = abelian_group(r, moduli)
        out = Dfr(target, tuple(UnitaryRep(target, rep.images, rep.projective,
                                           rep.factorizations, rep.label, check=False)
                                for rep in out.reps), out.tau, True,
                  f"Abelian{'NonAlgebraic' if nonalg else 'Algebraic'}({r}; {moduli})")
        return out
    if key == "directproductoffrees":
        ranks = tuple(int(x) for x in params.get("ranks", ()))
        if not ranks or any(x < 1 for x in ranks):
            raise DfrError("DirectProductOfFrees needs ranks >= 1")
        out = build_named_dfr("Fr", r=ranks[0])
        for x in ranks[1:]:
            out = dfr_product(out, build_named_dfr("Fr", r=x))
        target = direct_product_of_frees(ranks)
        return Dfr(target, tuple(UnitaryRep(target, rep.images, rep.projective, None, rep.label,
                                            check=False) for rep in out.reps),
                   TauModel("Calibrated", shape="ExpLower"), False,
                   f"DirectProductOfFrees{ranks}")
    if key == "tanzr":
        r = int(params.get("r", 0))
        if r < 1:
            raise DfrError("TanZr needs r >= 1")
        g = free_abelian_group(r)
        mats = [tan_matrix(*t) for t in tan_parameters(r)]
        return Dfr(g, (UnitaryRep(g, mats, label="tan"),), poly_tau(), False, f"TanZr({r})")
    if key == "shalenzfreezr":
        r = int(params.get("r", 0))
        if r < 1:
            raise DfrError("ShalenZFreeZr needs r >= 1")
        alpha_name = str(params.get("alpha", "sqrt2"))
        with mpmath.workprec(DEFAULT_PRECISION):
            alpha = _shalen_alpha(alpha_name)
            lam = mpmath.expjpi(alpha)
            big_lambda = Matrix.diagonal([lam, lam * lam], BIGFLOAT,
                                         amplitude_class=AmplitudeClass.CTILDE_NUMERIC)
            big_lambda_inv = big_lambda.dagger()
        g = free_product_z_zr(r)
        images, facts = [], []
        for p, m, n in tan_parameters(r):
            rho = tan_matrix(p, m, n).to_bigfloat()
            images.append(big_lambda @ rho @ big_lambda_inv)
            facts.append([big_lambda, rho, big_lambda_inv])
        y_img = tan_matrix(*tan_parameters(1)[0])
        images.append(y_img.to_bigfloat())
        facts.append([y_img.to_bigfloat()])
        rep = UnitaryRep(g, images, projective=True, factorizations=facts,
                         label=f"shalen_{alpha_name}")
        return Dfr(g, (rep,), UNBOUNDED, False, f"ShalenZFreeZr({r}, {alpha_name})")
    raise DfrError(f"unknown DFR family {name!r}")


# ---------------------------------------------------------------------------
# combinators


def dfr_combine(f: Dfr) -> Dfr:
    rep = f.reps[0]
    for other in f.reps[1:]:
        rep = direct_sum_reps(rep, other)
    return Dfr(f.group, (rep,), f.tau, f.diagonal, f"combine({f.label})")


def dfr_pad(f: Dfr, d_new: int) -> Dfr:
    if d_new <= f.d:
        raise DfrError("padding needs a strictly larger dimension")
    return Dfr(f.group, tuple(pad_rep(r, d_new) for r in f.reps), f.tau, f.diagonal,
               f"pad({f.label}, {d_new})")


def dfr_product(fg: Dfr, fh: Dfr, group: GroupPresentation | None = None) -> Dfr:
    d = max(fg.d, fh.d)
    if group is None:
        group = direct_product(fg.group, fh.group)
    if group.generator_count != fg.group.generator_count + fh.group.generator_count:
        raise DfrError("product group must list both factors' generators")
    offset = fg.group.generator_count
    reps = [extend_rep(pad_rep(r, d), group, 0) for r in fg.reps]
    reps += [extend_rep(pad_rep(r, d), group, offset) for r in fh.reps]
    return Dfr(group, tuple(reps), tau_min(fg.tau, fh.tau), fg.diagonal and fh.diagonal,
               f"({fg.label} x {fh.label})")


def dfr_subgroup(f: Dfr, subgroup: GroupPresentation, embedding: Sequence[Sequence[int]]) -> Dfr:
    reps = tuple(restrict_rep(r, subgroup, embedding) for r in f.reps)
    return Dfr(subgroup, reps, _pending(f.tau), f.diagonal, f"Res({f.label})")


def dfr_overgroup(f: Dfr, table: CosetTable) -> Dfr:
    reps = tuple(induce_rep(r, table) for r in f.reps)
    diagonal = f.diagonal and table.index == 1
    return Dfr(virtual_overgroup(table.base, table), reps, _pending(f.tau), diagonal,
               f"Ind({f.label})")


# ---------------------------------------------------------------------------
# certification


class CertificationError(RuntimeError):
    def __init__(self, message: str, witness=None):
        super().__init__(message)
        self.witness = witness


@dataclass
class CertificationReport:
    radius: int
    element_count: int
    per_length: list  # (n, m(n) as float, witness word)
    exp_base: float | None
    power: tuple | None
    declared: str
    declared_ok: bool | None
    violations: list
    passed: bool
    failure_witness: tuple | None = None
    failure_gap: float | None = None

    def to_json(self, group: GroupPresentation | None = None) -> dict:
        def fmt(w):
            return group.format_word(w) if group is not None else list(w)
        return {
            "radius": self.radius,
            "elements": self.element_count,
            "per_length": [{"n": n, "min_gap": v, "witness": fmt(w)} for n, v, w in self.per_length],
            "exp_base": self.exp_base,
            "power": None if self.power is None else {"coefficient": self.power[0],
                                                      "exponent": self.power[1]},
            "declared": self.declared,
            "declared_ok": self.declared_ok,
            "violations": [[fmt(w), n, g, t] for w, n, g, t in self.violations],
            "passed": self.passed,
            "failure_witness": None if self.failure_witness is None else fmt(self.failure_witness),
            "failure_gap": self.failure_gap,
        }


def element_gap(f: Dfr, w: Sequence[int]):
    """max_j (d - |chi_j(w)|) as (exactly_zero, value)."""
    best_zero, best = True, mpmath.mpf(0)
    for rep in f.reps:
        zero, gap = character_gap(rep, w)
        if not zero and (best_zero or gap > best):
            best_zero, best = False, gap
    return best_zero, best


def gap_table(f: Dfr, radius: int):
    """[(word, length, exactly_zero, gap)] over the non-identity elements of B(radius)."""
    out = []
    for w, n in enumerate_ball(f.group, radius):
        if n == 0:
            continue
        zero, gap = element_gap(f, w)
        out.append((w, n, zero, gap))
    return out


def certify_dfr(f: Dfr, radius: int, tol: ToleranceProfile = DEFAULT_TOLERANCE,
                table=None) -> CertificationReport:
    if table is None:
        table = gap_table(f, radius)
    eps = tol.eps
    minima: dict[int, tuple] = {}
    failure = None
    for w, n, zero, gap in table:
        if zero or gap <= eps:
            if failure is None:
                failure = (w, 0.0 if zero else float(gap))
            continue
        cur = minima.get(n)
        if cur is None or gap < cur[0]:
            minima[n] = (gap, w)
    per_length = [(n, float(minima[n][0]), minima[n][1]) for n in sorted(minima)]
    exp_base = power = None
    if per_length and failure is None:
        pts = [(n, v) for n, v, _ in per_length]
        try:
            exp_base = fit_exp_envelope(pts).base
            env = fit_power_envelope(pts)
            power = (env.coefficient, env.exponent)
        except EnvelopeError:
            pass
    violations = []
    declared_ok = None
    if f.tau.quantitative:
        declared_ok = True
        for w, n, zero, gap in table:
            t = f.tau.value(n)
            if zero or float(gap) < t - float(eps):
                violations.append((w, n, float(gap), t))
                declared_ok = False
    passed = failure is None and declared_ok is not False
    return CertificationReport(radius, len(table) + 1, per_length, exp_base, power,
                               f.tau.describe(), declared_ok, violations, passed,
                               None if failure is None else failure[0],
                               None if failure is None else failure[1])


def calibrate_tau(report: CertificationReport, shape: str, fixed_exponent: float | None = None,
                  safety: float = SAFETY_FACTOR) -> TauModel:
    """Largest envelope of the given shape below safety * m(n) on every scanned length."""
    if not report.passed and report.failure_witness is not None:
        raise CertificationError("cannot calibrate on a failed scan", report.failure_witness)
    pts = [(n, safety * v) for n, v, _ in report.per_length]
    table = tuple((n, v) for n, v, _ in report.per_length)
    if not pts:
        # vacuous: no non-identity elements in range
        if shape == "ExpLower":
            return TauModel("Calibrated", base=1.0, shape="ExpLower", calibration=table,
                            radius=report.radius)
        if shape == "PolyLower":
            return TauModel("Calibrated", 1.0, fixed_exponent or 0.0, shape="PolyLower",
                            fixed_exponent=fixed_exponent, calibration=table,
                            radius=report.radius)
        return TauModel("Calibrated", constant=1.0, shape="Constant", calibration=table,
                        radius=report.radius)
    if shape == "ExpLower":
        env = fit_exp_envelope(pts)
        return TauModel("Calibrated", base=env.base, shape="ExpLower", calibration=table,
                        radius=report.radius)
    if shape == "PolyLower":
        env = fit_power_envelope(pts, fixed_exponent)
        return TauModel("Calibrated", env.coefficient, env.exponent, shape="PolyLower",
                        fixed_exponent=fixed_exponent, calibration=table, radius=report.radius)
    if shape == "Constant":
        return TauModel("Calibrated", constant=min(v for _, v in pts) * (1 - 1e-12),
                        shape="Constant", calibration=table, radius=report.radius)
    raise DfrError(f"cannot calibrate shape {shape!r}")


def certify_and_calibrate(f: Dfr, radius: int, tol: ToleranceProfile = DEFAULT_TOLERANCE):
    """Certify on B(radius); models without numeric constants get Calibrated ones.

    Returns (certified DFR, report).  Raises CertificationError on a zero gap
    or a violated declared model."""
    report = certify_dfr(f, radius, tol)
    if not report.passed:
        if report.failure_witness is not None:
            raise CertificationError(
                f"non-identity element with gap {report.failure_gap} <= eps", report.failure_witness)
        w = report.violations[0][0]
        raise CertificationError("declared tau model violated", w)
    tau = f.tau
    if tau.kind != "Unbounded" and not tau.has_constants:
        tau = calibrate_tau(report, tau.effective_shape, tau.fixed_exponent)
    out = replace(f, tau=tau, certified=True, certified_radius=radius)
    return out, report


DEFAULT_RADII = {
    "Trivial": 3, "Zm": 12, "ZAlgebraic": 200, "ZNonAlgebraic": 200, "F2": 8, "Fr": 5,
    "AbelianAlgebraic": 12, "AbelianNonAlgebraic": 10, "DirectProductOfFrees": 4, "TanZr": 6,
    "ShalenZFreeZr": 6,
}


def build_certified(name: str, radius: int | None = None, **params) -> tuple[Dfr, CertificationReport]:
    f = build_named_dfr(name, **params)
    family = f.label.split("(")[0]
    if radius is None:
        radius = DEFAULT_RADII.get(family, 6)
    return certify_and_calibrate(f, radius)


def machine_ready(f: Dfr) -> bool:
    return f.certified and (f.tau.kind == "Unbounded" or f.tau.quantitative)


def eval_dfr(f: Dfr, j: int, w: Sequence[int]) -> Matrix:
    return eval_rep(f.reps[j], w)
