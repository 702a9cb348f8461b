"""Plain step-by-step transcription of the state-space recursions.

Used as an independent oracle for the production filter. Deliberately naive:
everything is a float or a list, trig factors are recomputed at every step,
and nothing is imported from the package under test.
"""

import math


def run_recursions(
    y,
    omega,
    alpha,
    beta,
    phi,
    long_run_trend,
    components,  # list of (period, harmonics)
    gamma1,  # one per component
    gamma2,
    ar,
    ma,
    level0,
    trend0,
    harmonics0,  # per component: list of (s, s_star) pairs
    d0,  # most recent first
    e0,
    offset=0.0,
):
    """Returns (states, residuals) where states[t] is the flat vector
    [level, trend, s/s* pairs in component order, d register, e register]
    after the update at step t."""
    p = len(ar)
    q = len(ma)

    level = level0
    trend = trend0
    s = [[pair[0] for pair in comp] for comp in harmonics0]
    s_star = [[pair[1] for pair in comp] for comp in harmonics0]
    d_hist = list(d0)
    e_hist = list(e0)

    states = []
    residuals = []
    for t in range(len(y)):
        x = y[t] + offset
        if omega == 0:
            z = math.log(x)
        else:
            z = (x**omega - 1.0) / omega

        d_pred = 0.0
        for i in range(p):
            d_pred = d_pred + ar[i] * d_hist[i]
        for j in range(q):
            d_pred = d_pred + ma[j] * e_hist[j]

        seasonal = 0.0
        for ci in range(len(components)):
            for ji in range(components[ci][1]):
                seasonal = seasonal + s[ci][ji]

        one_step = level + phi * trend + seasonal + d_pred
        eps = z - one_step
        d = d_pred + eps

        new_level = level + phi * trend + alpha * d
        new_trend = (1.0 - phi) * long_run_trend + phi * trend + beta * d

        new_s = [row[:] for row in s]
        new_s_star = [row[:] for row in s_star]
        for ci in range(len(components)):
            period = components[ci][0]
            for ji in range(components[ci][1]):
                lam = 2.0 * math.pi * (ji + 1) / period
                new_s[ci][ji] = (
                    s[ci][ji] * math.cos(lam)
                    + s_star[ci][ji] * math.sin(lam)
                    + gamma1[ci] * d
                )
                new_s_star[ci][ji] = (
                    -s[ci][ji] * math.sin(lam)
                    + s_star[ci][ji] * math.cos(lam)
                    + gamma2[ci] * d
                )

        d_hist = ([d] + d_hist)[:p]
        e_hist = ([eps] + e_hist)[:q]
        level = new_level
        trend = new_trend
        s = new_s
        s_star = new_s_star

        flat = [level, trend]
        for ci in range(len(components)):
            for ji in range(components[ci][1]):
                flat.append(s[ci][ji])
                flat.append(s_star[ci][ji])
        flat.extend(d_hist)
        flat.extend(e_hist)
        states.append(flat)
        residuals.append(eps)

    return states, residuals


def random_parameterization(rng):
    """One random admissible model + series for fidelity checks."""
    omega = rng.uniform(0.0, 1.0)
    alpha = rng.uniform(0.01, 0.3)
    use_trend = rng.random() < 0.5
    if use_trend:
        phi = rng.uniform(0.8, 1.0)
        beta = rng.uniform(0.0, 0.08)
        long_run = rng.uniform(-0.05, 0.05)
        trend0 = rng.uniform(-0.1, 0.1)
    else:
        phi, beta, long_run, trend0 = 1.0, 0.0, 0.0, 0.0

    components = [(rng.choice([6.0, 8.0, 24.0]), rng.randint(1, 3))]
    if rng.random() < 0.5:
        components.append((12.5, rng.randint(1, 2)))
    gamma1 = [rng.uniform(-0.02, 0.05) for _ in components]
    gamma2 = [rng.uniform(-0.02, 0.05) for _ in components]

    p = rng.randint(0, 2)
    q = rng.randint(0, 2)
    while True:
        ar = [rng.uniform(-0.4, 0.4) for _ in range(p)]
        if _poly_ok([-a for a in ar]):
            break
    while True:
        ma = [rng.uniform(-0.4, 0.4) for _ in range(q)]
        if _poly_ok(ma):
            break

    level0 = rng.uniform(1.5, 4.0)
    harmonics0 = [
        [(rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3)) for _ in range(k)]
        for _, k in components
    ]
    d0 = [rng.uniform(-0.1, 0.1) for _ in range(p)]
    e0 = [rng.uniform(-0.1, 0.1) for _ in range(q)]
    y = [math.exp(rng.uniform(math.log(3.0), math.log(30.0))) for _ in range(60)]
    return {
        "y": y,
        "omega": omega,
        "alpha": alpha,
        "beta": beta,
        "phi": phi,
        "long_run_trend": long_run,
        "components": components,
        "gamma1": gamma1,
        "gamma2": gamma2,
        "ar": ar,
        "ma": ma,
        "level0": level0,
        "trend0": trend0,
        "harmonics0": harmonics0,
        "d0": d0,
        "e0": e0,
        "use_trend": use_trend,
    }


def _poly_ok(coeffs):
    """1 + c1 z + c2 z^2 has all roots outside the unit circle."""
    c = list(coeffs)
    while c and c[-1] == 0:
        c.pop()
    if not c:
        return True
    if len(c) == 1:
        return abs(c[0]) < 1
    c1, c2 = c
    return abs(c2) < 1 and c2 + c1 > -1 and c2 - c1 > -1
