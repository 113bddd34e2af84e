#!/usr/bin/env python3
"""Polymer stress of Hookean dumbbells in simple shear.

For each shear rate, runs the inertial SDE ensemble to steady state and
compares tau_12 / rate with the stationary Lyapunov covariance (inertial
and overdamped), printing the deviation in standard errors.
"""

from __future__ import annotations

import argparse

import numpy as np

from polykin.dumbbell import InertialDumbbell, PhysParamsDumbbell, equilibrium_state
from polykin.ensemble import Ensemble, simulate_ensemble
from polykin.forces import FlowField, SpringModel
from polykin.harness import inertial_lyapunov_covariance, lyapunov_covariance, stress_tensor
from polykin.verification import slowest_relaxation


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rates", type=float, nargs="+", default=[0.25, 0.5, 1.0, 2.0])
    ap.add_argument("--epsilon", type=float, default=0.5)
    ap.add_argument("-N", type=int, default=100_000)
    ap.add_argument("--dt", type=float, default=0.05)
    ap.add_argument("--seed", type=int, default=11)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()

    spring = SpringModel("hookean", 1.0)
    print(f"{'rate':>6} {'tau12/rate':>11} {'SE':>8} {'inertial':>9} {'limit':>7} {'z':>6}")
    for k, rate in enumerate(args.rates):
        par = PhysParamsDumbbell(args.epsilon, spring=spring, flow=FlowField.simple_shear(rate, 3), dim=3)
        rng = np.random.default_rng([args.seed, k])
        ens = Ensemble(equilibrium_state(args.N, par, rng), args.seed + k)
        ens = simulate_ensemble(ens, InertialDumbbell(par), args.dt, 20 * slowest_relaxation(par), threads=args.threads)
        st = stress_tensor(ens, spring)
        oracle = spring.H * inertial_lyapunov_covariance(par)[0, 1] / rate
        limit = spring.H * lyapunov_covariance(par.flow.kappa, spring.H)[0, 1] / rate
        val, se = st.tau[0, 1] / rate, st.se[0, 1] / rate
        print(f"{rate:6.2f} {val:11.5f} {se:8.5f} {oracle:9.5f} {limit:7.4f} {(val - oracle) / se:6.2f}")


if __name__ == "__main__":
    main()
