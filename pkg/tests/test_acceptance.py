"""Acceptance suite: one test per acceptance criterion.

Each test prints a ``criterion N: PASS/FAIL`` line.  Heavy runs are
shared across criteria through session-scoped fixtures.  Criteria 1-5,
8 and 11 drive the 1D bar; 9 and 10 drive the 2D specimens.
"""

import numpy as np
import pytest

from ualfem.config import parse_config, build_context
from ualfem.output import nodal_damage
from ualfem.solvers import run_analysis

D_MAX = 0.999


def execute(text, max_increments=200_000):
    cfg = parse_config(text)
    ctx = build_context(cfg)
    result = run_analysis(ctx, cfg.solver, max_increments=max_increments,
                          literal_c=cfg.pnc_literal_c)
    return ctx, result


def curve(history):
    return np.array([(r.applied_disp, r.reaction) for r in history])


def peak_reaction(history):
    return max(r.reaction for r in history)


def longest_softening_run(history):
    """Longest run of consecutive increments with both displacement and
    reaction strictly decreasing."""
    best = cur = 0
    for a, b in zip(history, history[1:]):
        if b.applied_disp < a.applied_disp and b.reaction < a.reaction:
            cur += 1
            best = max(best, cur)
        else:
            cur = 0
    return best


def polyline_gap(pts, poly):
    """Max distance from ``pts`` to the polyline ``poly`` (both (n, 2))."""
    a, b = poly[:-1], poly[1:]
    ab = b - a
    denom = np.maximum((ab**2).sum(axis=1), 1e-300)
    worst = 0.0
    for p in pts:
        t = np.clip(((p - a) * ab).sum(axis=1) / denom, 0.0, 1.0)
        proj = a + t[:, None] * ab
        worst = max(worst, np.sqrt(((p - proj) ** 2).sum(axis=1)).min())
    return worst


def overlay_gap(c1, c2, peak, disp_scale):
    """Symmetric curve distance with displacement scaled to force units."""
    s = np.array([peak / disp_scale, 1.0])
    a, b = c1 * s, c2 * s
    return max(polyline_gap(a[::3], b), polyline_gap(b[::3], a))


def report(criterion, passed, detail):
    print(f"criterion {criterion}: {'PASS' if passed else 'FAIL'} ({detail})")
    return passed


# ---------------------------------------------------------------------------
# Shared 1D runs
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def verification_trio():
    """Bar1D nonlocal fine, phi=0.1, lc=6, bar-table parameters."""
    base = (
        'benchmark="bar1d"\nresolution="fine"\nlaw="nonlocal"\nphi=0.1\nlc=6.0\n'
    )
    runs = {}
    for solver, tol in (("ual_pc", 1e-6), ("nr", 1e-6), ("fal", 1e-4)):
        runs[solver] = execute(base + f'solver="{solver}"\ntol={tol}\n')
    return runs


@pytest.fixture(scope="module")
def local_coarse_runs():
    """Bar1D local coarse: UAL (non-consistent scheme) and NR per phi."""
    runs = {}
    for phi in (0.75, 0.80, 0.85):
        runs[("ual", phi)] = execute(
            f'benchmark="bar1d"\nsolver="ual_pnc"\nlaw="local"\nphi={phi}\n'
        )
    for phi in (0.75, 0.80):
        runs[("nr", phi)] = execute(
            f'benchmark="bar1d"\nsolver="nr"\nlaw="local"\nphi={phi}\n'
        )
    return runs


@pytest.fixture(scope="module")
def objectivity_pair():
    """Bar1D nonlocal phi=0.5 lc=5, coarse vs fine."""
    runs = {}
    for resolution in ("coarse", "fine"):
        runs[resolution] = execute(
            f'benchmark="bar1d"\nsolver="ual_pc"\nlaw="nonlocal"\n'
            f'phi=0.5\nlc=5.0\nresolution="{resolution}"\n'
        )
    return runs


# ---------------------------------------------------------------------------
# Criterion 1: verification overlay
# ---------------------------------------------------------------------------

def test_criterion_1_verification_overlay(verification_trio):
    curves = {}
    for solver, (_ctx, result) in verification_trio.items():
        assert result.completed, f"{solver} did not complete the path"
        curves[solver] = curve(result.history)
    peak = max(c[:, 1].max() for c in curves.values())
    # all three curves are monotone in displacement here: interpolate
    # reactions at matched displacements over the common range
    lo = max(c[:, 0].min() for c in curves.values())
    hi = min(c[:, 0].max() for c in curves.values())
    disp = np.linspace(lo, hi, 400)
    interps = {
        s: np.interp(disp, c[:, 0], c[:, 1]) for s, c in curves.items()
    }
    worst = 0.0
    names = list(interps)
    for i in range(len(names)):
        for j in range(i + 1, len(names)):
            worst = max(worst, np.abs(interps[names[i]] - interps[names[j]]).max())
    passed = worst <= 0.01 * peak
    assert report(1, passed, f"max pairwise gap {worst / peak * 100:.3f}% of peak")


# ---------------------------------------------------------------------------
# Criterion 2: snap-back capture
# ---------------------------------------------------------------------------

def test_criterion_2_snapback_capture(local_coarse_runs):
    ok = True
    details = []
    for phi in (0.75, 0.80):
        _ctx, ual = local_coarse_runs[("ual", phi)]
        _ctx, nr = local_coarse_runs[("nr", phi)]
        ual_run = longest_softening_run(ual.history)
        nr_run = longest_softening_run(nr.history)
        ok &= ual_run >= 5
        ok &= nr_run == 0
        ok &= not nr.completed
        details.append(
            f"phi={phi}: ual run {ual_run}, nr run {nr_run}, nr status {nr.status}"
        )
    assert report(2, ok, "; ".join(details))


# ---------------------------------------------------------------------------
# Criterion 3: increment-count superiority over FAL
# ---------------------------------------------------------------------------

def test_criterion_3_increment_count_superiority(local_coarse_runs):
    _ctx, ual = local_coarse_runs[("ual", 0.80)]
    _ctx_f, fal = execute('benchmark="bar1d"\nsolver="fal"\nlaw="local"\nphi=0.80\ntol=1e-6\n')
    n_ual, n_fal = len(ual.history), len(fal.history)
    passed = ual.completed and n_ual <= n_fal / 5
    assert report(
        3,
        passed,
        f"ual {n_ual} ({ual.status}) vs fal {n_fal} ({fal.status}); "
        f"a consistent-tangent cylindrical arc-length baseline matches the "
        f"unified solver on this path instead of trailing it fivefold",
    )


# ---------------------------------------------------------------------------
# Criterion 4: nonlocal mesh objectivity
# ---------------------------------------------------------------------------

def test_criterion_4_mesh_objectivity(objectivity_pair):
    (_cc, coarse), (_cf, fine) = objectivity_pair["coarse"], objectivity_pair["fine"]
    assert coarse.completed and fine.completed
    c1, c2 = curve(coarse.history), curve(fine.history)
    p1, p2 = c1[:, 1].max(), c2[:, 1].max()
    peak = max(p1, p2)
    peak_gap = abs(p1 - p2) / peak
    post1 = c1[c1[:, 1].argmax():]
    post2 = c2[c2[:, 1].argmax():]
    post_gap = overlay_gap(post1, post2, peak, 0.01) / peak
    passed = peak_gap <= 0.02 and post_gap <= 0.03
    assert report(
        4, passed,
        f"peak gap {peak_gap * 100:.2f}%, post-peak overlay {post_gap * 100:.2f}% of peak",
    )


# ---------------------------------------------------------------------------
# Criterion 5: peak-force monotonicity in phi
# ---------------------------------------------------------------------------

def test_criterion_5_peak_monotonicity(local_coarse_runs):
    peaks = [peak_reaction(local_coarse_runs[("ual", phi)][1].history)
             for phi in (0.75, 0.80, 0.85)]
    passed = peaks[0] < peaks[1] < peaks[2]
    assert report(5, passed, "peaks " + ", ".join(f"{p:.4f}" for p in peaks))


# ---------------------------------------------------------------------------
# Criterion 6: Jacobian consistency (randomized finite differences)
# ---------------------------------------------------------------------------

def test_criterion_6_jacobian_consistency():
    # exercised in depth by the assembly test module; repeated here on
    # freshly randomized small meshes as the acceptance statement.
    from test_assembly import (
        _check_nonlocal_fd,
        bar_ctx,
        fd_jacobian,
        grid_ctx,
        _local_fint,
        zeros_gp,
    )
    from ualfem.assembly import assemble_local

    rng = np.random.default_rng(2024)
    worst_elastic, worst_damage = 0.0, 0.0
    for trial in range(3):
        for ctx_fn in (lambda: bar_ctx(4 + trial), lambda: grid_ctx(2, 2 + trial % 2)):
            ctx = ctx_fn()
            n = ctx.dofmap.n_disp_dofs
            for scale, elastic in ((0.5e-4, True), (6e-4, False)):
                u = rng.uniform(0.2, 1.0, n) * scale * np.linspace(0, 1, n)
                res = assemble_local(ctx, u, np.zeros(len(ctx.P)), zeros_gp(ctx), zeros_gp(ctx))
                J_fd = fd_jacobian(lambda x: _local_fint(ctx, x), u, h=1e-9)
                rel = np.linalg.norm(res.blocks.K_uu.toarray() - J_fd) / max(
                    np.linalg.norm(J_fd), 1.0
                )
                if elastic:
                    worst_elastic = max(worst_elastic, rel)
                else:
                    worst_damage = max(worst_damage, rel)
    # nonlocal blocks, both dimensions
    _check_nonlocal_fd(bar_ctx(5, law="nonlocal", lc=0.8), 4e-4, 4e-4, 1e-5)
    _check_nonlocal_fd(grid_ctx(2, 2, law="nonlocal", lc=0.5), 6e-4, 6e-4, 1e-5)
    passed = worst_elastic <= 1e-6 and worst_damage <= 1e-5
    assert report(
        6, passed,
        f"local FD gap: elastic {worst_elastic:.2e} (<=1e-6), "
        f"damage {worst_damage:.2e} (<=1e-5); nonlocal blocks within 1e-5",
    )


# ---------------------------------------------------------------------------
# Criterion 7: partitioned/monolithic equivalence
# ---------------------------------------------------------------------------

def test_criterion_7_partitioned_monolithic_equivalence():
    from test_solvers import (
        assemble_at,
        bar_ctx,
        damaged_increment_state,
        dense_local_solve,
        dense_nonlocal_solve,
    )
    from ualfem.assembly import constraint_residual
    from ualfem.solvers import (
        ual_pc_local_corrector,
        ual_pc_nonlocal_corrector,
        ual_pnc_corrector,
    )

    worst = 0.0
    # PC local (8 DOFs) against the dense augmented system
    ctx = bar_ctx(n_el=3, weak=(1,), phi=0.6)
    state = damaged_increment_state(ctx)
    inc = state.last_increment.copy()
    inc.d_m *= 1.3
    res = assemble_at(ctx, state, inc)
    res.bundle.g = constraint_residual(ctx, inc, ctx.controls.dl_max, 0.0)
    delta = ual_pc_local_corrector(ctx, res.bundle, res.blocks, inc, 0.0)
    df, duf, dm = dense_local_solve(ctx, res.bundle, res.blocks, inc, 0.0)
    scale = max(abs(dm), np.abs(duf).max(), np.abs(df).max())
    worst = max(
        worst,
        abs(delta.d_m - dm) / scale,
        np.abs(delta.d_uf - duf).max() / scale,
        np.abs(delta.d_f - df).max() / scale,
    )

    # PC nonlocal (<= 30 DOFs incl. nonlocal strain)
    ctxn = bar_ctx(n_el=4, length=100.0, law="nonlocal", lc=8.0, e_mod=30000.0,
                   weak=(1, 2), phi=0.5, alpha=0.1, load=0.03, dl_max=4e-4)
    staten = damaged_increment_state(ctxn, n_increments=150)
    incn = staten.last_increment.copy()
    incn.d_m *= 1.4
    resn = assemble_at(ctxn, staten, incn)
    resn.bundle.g = constraint_residual(ctxn, incn, ctxn.controls.dl_max, 0.0)
    deltan = ual_pc_nonlocal_corrector(ctxn, resn.bundle, resn.blocks, incn, 0.0)
    dfn, dufn, dmn, debn = dense_nonlocal_solve(ctxn, resn.bundle, resn.blocks, incn, 0.0)
    scale_n = max(abs(dmn), np.abs(dufn).max(), np.abs(dfn).max(), np.abs(debn).max())
    worst = max(
        worst,
        abs(deltan.d_m - dmn) / scale_n,
        np.abs(deltan.d_uf - dufn).max() / scale_n,
        np.abs(deltan.d_f - dfn).max() / scale_n,
        np.abs(deltan.d_eb - debn).max() / scale_n,
    )

    # PNC: dense affine reduction plus the same quadratic root
    res2 = assemble_at(ctx, state, inc)
    dl = ctx.controls.dl_max
    res2.bundle.g = constraint_residual(ctx, inc, dl, 0.0)
    pnc = ual_pnc_corrector(ctx, res2.bundle, res2.blocks, inc, dl, 0.0)
    Jff = res2.blocks.J_ff.toarray()
    du_a = np.linalg.solve(Jff, -res2.bundle.r_f)
    du_b = np.linalg.solve(Jff, -(res2.blocks.J_fp @ ctx.up_p))
    up2 = float(ctx.up_p @ ctx.up_p)
    uf0 = inc.d_uf + du_a
    roots = np.roots([
        up2 + du_b @ du_b,
        2 * (inc.d_m * up2 + uf0 @ du_b),
        inc.d_m**2 * up2 + uf0 @ uf0 - dl * dl,
    ])
    best = min(np.real(roots), key=lambda r: abs(r - pnc.d_m))
    worst = max(worst, abs(pnc.d_m - best) / max(abs(best), 1e-12))

    passed = worst <= 1e-9
    assert report(7, passed, f"worst relative deviation {worst:.2e} (<=1e-9)")


# ---------------------------------------------------------------------------
# Criterion 8: constraint and irreversibility invariants
# ---------------------------------------------------------------------------

def test_criterion_8_constraint_and_irreversibility(
    verification_trio, local_coarse_runs, objectivity_pair
):
    checked = 0
    worst_ratio = 0.0
    irr_ok = True
    all_runs = (
        [(s, r) for s, r in verification_trio.items()]
        + [(k, r) for k, r in local_coarse_runs.items()]
        + [(k, r) for k, r in objectivity_pair.items()]
    )
    for key, (ctx, result) in all_runs:
        irr_ok &= result.diagnostics["irreversibility_min"] >= -1e-14
        solver = key[0] if isinstance(key, tuple) else key
        if solver in ("ual", "ual_pc", "ual_pnc"):
            tol = ctx.controls.tol
            for absg in result.diagnostics["abs_g"]:
                worst_ratio = max(worst_ratio, absg / (10 * tol))
                checked += 1
    passed = worst_ratio <= 1.0 and irr_ok and checked > 1000
    assert report(
        8, passed,
        f"{checked} unified increments, worst |g|/(10 tol) = {worst_ratio:.2e}, "
        f"damage non-decreasing: {irr_ok}",
    )


# ---------------------------------------------------------------------------
# Criterion 9: d_max effect on the single-notch-tension peak
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def snt_dmax_pair():
    runs = {}
    for dmax in (0.99, 0.999):
        runs[dmax] = execute(
            f'benchmark="snt"\nsolver="ual_pnc"\nlaw="local"\nd_max={dmax}\n',
            max_increments=2500,
        )
    return runs


def test_criterion_9_dmax_effect(snt_dmax_pair):
    peaks = {}
    for dmax, (_ctx, result) in snt_dmax_pair.items():
        reactions = [r.reaction for r in result.history]
        ipk = int(np.argmax(reactions))
        # the peak must be interior: the path must descend afterwards
        assert ipk < len(reactions) - 1, f"d_max={dmax}: peak not bracketed"
        assert min(reactions[ipk:]) < 0.8 * reactions[ipk]
        peaks[dmax] = reactions[ipk]
    ratio = peaks[0.99] / peaks[0.999]
    passed = peaks[0.99] > peaks[0.999] and 1.05 <= ratio <= 1.20
    assert report(
        9, passed,
        f"peaks {peaks[0.99]:.4f} (d_max 0.99) vs {peaks[0.999]:.4f} (0.999), "
        f"ratio {ratio:.3f} in [1.05, 1.20]",
    )


# ---------------------------------------------------------------------------
# Criterion 10: 2D robustness beyond the incremental Newton solver
# ---------------------------------------------------------------------------

TERMINAL_BANDS = {
    # problem -> function(nodes) selecting the far-boundary band the
    # damage path must reach
    "ssnt": lambda n: n[:, 0] > 96.0,
    "tnt": lambda n: (np.abs(n[:, 0] - 50.0) < 4.0) & (np.abs(n[:, 1] - 50.0) < 5.0),
    "sns": lambda n: (n[:, 1] < 3.0) & (n[:, 0] > 50.0),
}


@pytest.fixture(scope="module")
def robustness_2d_runs():
    cases = {
        "ssnt": 'benchmark="ssnt"\nsolver="{s}"\nlaw="local"\n',
        "tnt": 'benchmark="tnt"\nsolver="{s}"\nlaw="local"\n',
        "sns": 'benchmark="sns"\nsolver="{s}"\nlaw="nonlocal"\nlc=2.0\n',
    }
    runs = {}
    for prob, template in cases.items():
        runs[(prob, "ual")] = execute(template.format(s="ual_pc"), max_increments=8000)
        runs[(prob, "nr")] = execute(template.format(s="nr"), max_increments=8000)
    return runs


def test_criterion_10_2d_robustness(robustness_2d_runs):
    ok = True
    details = []
    for prob in ("ssnt", "tnt", "sns"):
        ctx_u, ual = robustness_2d_runs[(prob, "ual")]
        _ctx_n, nr = robustness_2d_runs[(prob, "nr")]
        ual_disp = max(r.applied_disp for r in ual.history)
        nr_disp = max(r.applied_disp for r in nr.history) if nr.history else 0.0
        dmg = nodal_damage(ctx_u.mesh, ual.state.gp_damage)
        band = TERMINAL_BANDS[prob](ctx_u.mesh.nodes)
        reach = dmg[band].max()
        nr_dmg = nodal_damage(_ctx_n.mesh, nr.state.gp_damage)
        nr_reach = nr_dmg[TERMINAL_BANDS[prob](_ctx_n.mesh.nodes)].max()
        case_ok = (
            ual_disp > nr_disp
            and reach >= 0.9 * D_MAX
            and nr_reach < 0.9 * D_MAX
        )
        ok &= case_ok
        details.append(
            f"{prob}: disp {ual_disp:.4g}>{nr_disp:.4g}, band damage "
            f"{reach:.3f} (nr {nr_reach:.3f})"
        )
    assert report(10, ok, "; ".join(details))


# ---------------------------------------------------------------------------
# Criterion 11: tolerance insensitivity
# ---------------------------------------------------------------------------

def test_criterion_11_tolerance_insensitivity():
    curves = {}
    for tol in (1e-6, 1e-8, 1e-10):
        _ctx, result = execute(
            f'benchmark="bar1d"\nsolver="ual_pnc"\nlaw="local"\nphi=0.80\ntol={tol}\n'
        )
        assert result.completed
        curves[tol] = curve(result.history)
    peak = max(c[:, 1].max() for c in curves.values())
    tols = list(curves)
    worst = 0.0
    for i in range(len(tols)):
        for j in range(i + 1, len(tols)):
            worst = max(worst, overlay_gap(curves[tols[i]], curves[tols[j]], peak, 0.01))
    passed = worst <= 0.001 * peak
    assert report(11, passed, f"overlay gap {worst / peak * 100:.4f}% of peak")
