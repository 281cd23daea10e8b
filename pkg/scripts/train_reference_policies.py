"""Train and save the reference policies bundled with the test suite.

Writes tests/data/{vanilla,radial,sa}_pixelgrid.txt.  The vanilla policy
trains from scratch; the two certified objectives fine-tune from the
vanilla result, because their regularizers anchor on the actions stored
in replay and collapse to a one-action policy when those actions are
still exploratory.  Rerunning this script reproduces the files bit for
bit (all sampling is seeded).

Usage: python scripts/train_reference_policies.py [--out DIR]
"""
from __future__ import annotations

import argparse
import pathlib
import sys
import time

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent.parent / "src"))

from policyprobe import checkpoint as cp
from policyprobe import nn, qlearning as ql
from policyprobe.envs import make_env, make_spec, oracle_return

EVAL_EPISODES = list(range(20))
CERT_RADII = (5e-5, 1e-4, 5e-4, 1e-3, 1 / 255)


def visited_states(params: nn.ParamSet, spec, episode_seeds):
    """Observations along greedy rollouts, the harness's state sample."""
    env = make_env(spec)
    states = []
    for seed in episode_seeds:
        obs = env.reset(seed)
        terminal = False
        while not terminal:
            states.append(obs.copy())
            result = env.step(ql.greedy_action(params, obs))
            obs, terminal = result.observation, result.terminal
    return states


def report(name: str, ck: ql.Checkpoint, spec, elapsed: float) -> None:
    returns = ql.evaluate(ck.params, spec, EVAL_EPISODES)
    oracle = sum(oracle_return(spec, s) for s in EVAL_EPISODES) / len(EVAL_EPISODES)
    states = visited_states(ck.params, spec, EVAL_EPISODES)
    certs = " ".join(
        f"cert@{eps:g}={sum(ql.certified(ck.params, s, eps) for s in states) / len(states):.3f}"
        for eps in CERT_RADII
    )
    print(
        f"{name}: {elapsed:.0f}s eval {returns.mean():+.4f} "
        f"oracle {oracle:+.4f} {certs} (states={len(states)})",
        flush=True,
    )


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument(
        "--out",
        default=str(pathlib.Path(__file__).resolve().parent.parent / "tests" / "data"),
        help="directory for the checkpoint files",
    )
    args = parser.parse_args(argv)
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    spec = make_spec("pixelgrid", size=8, seed=0)

    t0 = time.time()
    vanilla = ql.train(spec, ql.TrainConfig(objective="vanilla", total_steps=30_000, seed=7))
    report("vanilla", vanilla, spec, time.time() - t0)
    ck_id = cp.save_checkpoint(out / "vanilla_pixelgrid.txt", vanilla)
    print(f"  -> vanilla_pixelgrid.txt id {ck_id}")

    # Fine-tune settings shared by both certified objectives: near-greedy
    # exploration so replay actions match the policy, a gentle learning
    # rate, and the robustness radius ramped in over the first half.  The
    # per-objective knobs below are the strongest settings found that
    # keep the greedy policy intact: the radial overlap term needs a
    # small weight, and the sa hinge needs its margin target capped near
    # the network's natural Q gaps (~0.03) plus a short schedule.
    tuned_settings = {
        "radial": dict(objective="radial", total_steps=8_000, adv_weight=0.1),
        "sa": dict(objective="sa-ddqn", total_steps=2_000, sa_hinge_cap=0.01),
    }
    for name, overrides in tuned_settings.items():
        config = ql.TrainConfig(
            lr=1e-4,
            eps_rob=5e-4,
            eps_ramp_start=0,
            eps_ramp_steps=overrides["total_steps"] // 2,
            eps_start=0.01,
            eps_end=0.01,
            eps_decay_steps=1,
            replay_capacity=10_000,
            seed=7,
            **overrides,
        )
        t0 = time.time()
        tuned = ql.train(spec, config, init_params=vanilla.params)
        report(name, tuned, spec, time.time() - t0)
        ck_id = cp.save_checkpoint(out / f"{name}_pixelgrid.txt", tuned)
        print(f"  -> {name}_pixelgrid.txt id {ck_id}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
