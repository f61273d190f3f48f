"""Scenario-building helpers shared by the test modules."""

from htlip import ModelParams, Scenario, build_qp, make_profile, make_reference, solve_qp


def make_scenario(profile_kind="static", dtau=0.3, v_des=0.0, duration=6.0,
                  e0=(0.0, 0.0), seed=0, profile_kw=None, **kw):
    profile = make_profile(profile_kind, **(profile_kw or {}))
    params = kw.pop("params", None) or ModelParams(dtau=dtau)
    ref = make_reference(v_des, params.dtau, profile, params)
    return Scenario(profile=profile, params=params, reference=ref,
                    duration=duration, e0=e0, seed=seed, **kw)


def static_gain(params, u_xr=0.0, eps=1e-6):
    """Fixed gain certified for a motionless surface (QP optimum at f0)."""
    qp = build_qp(params.f0, params.dtau, (0.0, 0.0), u_xr, params, eps)
    sol = solve_qp(qp, want_multipliers=False)
    assert sol.status == "optimal"
    return sol.gain
