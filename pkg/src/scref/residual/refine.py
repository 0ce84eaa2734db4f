"""Online refinement loop: frozen base policy plus SAC-trained residual.

Every macro-step queries the base once for a chunk and its lookahead, samples
one residual vector, broadcasts it over the n executed sub-steps, scores the
realized motion against the predicted short-term goal, and stores the
transition together with the next macro-step's base features.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..envs import ToyEnv, get_task
from ..evaluate import evaluate_policy
from ..flow_policy import FlowPolicy, sample_action
from ..nn import params_checksum
from ..reward import GuidanceContext, RewardConfig, final_reward, goal_position, guidance_reward
from ..seeding import derive_rng, derive_seed
from .compose import RESIDUAL_OBS_DIM, build_residual_obs, compose_action
from .replay import ReplayBuffer, Transition
from .sac import SACConfig, SACState, sample_residual, update_burst
from .schedule import StageSchedule


@dataclass
class RefineConfig:
    task_id: str
    total_env_steps: int
    collect_env_steps: int
    ramp_env_steps: int
    lambda_target: float
    lambda_eval: float
    n_steps: int = 8
    ode_steps: int = 16
    eval_every_env: int = 0  # 0 -> total // 10
    eval_episodes: int = 25
    eval_batch: int = 25
    seed: int = 0

    def __post_init__(self):
        if not (1 <= self.n_steps):
            raise ValueError("n_steps must be >= 1")
        if self.eval_every_env == 0:
            self.eval_every_env = max(self.total_env_steps // 10, self.n_steps)


@dataclass
class RefineResult:
    sac: SACState
    schedule: StageSchedule
    train_rows: list[dict] = field(default_factory=list)
    eval_rows: list[dict] = field(default_factory=list)
    base_frozen_ok: bool = True
    macro_steps: int = 0
    env_steps: int = 0
    buffer: ReplayBuffer | None = None


def run_refinement(
    base: FlowPolicy,
    sac_cfg: SACConfig,
    cfg: RefineConfig,
    reward_cfg: RewardConfig,
    eval_sink=None,
) -> RefineResult:
    """Algorithm: per macro-step query base, compose residual, push, train.

    The base policy is never placed on a tape; a parameter checksum taken
    before and after guards the freeze.
    """
    if sac_cfg.obs_dim != RESIDUAL_OBS_DIM or sac_cfg.base_feat_dim != cfg.n_steps * 5:
        raise ValueError("SAC network dims do not match the refinement config")
    task = get_task(cfg.task_id)
    env = ToyEnv(task)
    n = cfg.n_steps
    macro_total = cfg.total_env_steps // n
    sched = StageSchedule(
        t_collect=cfg.collect_env_steps // n,
        t_ramp=max(cfg.ramp_env_steps // n, 1),
        lambda_target=cfg.lambda_target,
        lambda_eval=cfg.lambda_eval,
    )
    buffer = ReplayBuffer(max(macro_total, 1), RESIDUAL_OBS_DIM, n * 5, 5)
    sac = SACState(sac_cfg, derive_rng(cfg.seed, "sac"))
    res_rng = derive_rng(cfg.seed, "res")
    buf_rng = derive_rng(cfg.seed, "buffer")
    checksum_before = params_checksum(base.named_params())

    result = RefineResult(sac=sac, schedule=sched)
    eval_every_macro = max(cfg.eval_every_env // n, 1)

    episode = 0
    obs = env.reset(derive_seed(cfg.seed, "env", episode))
    base_rng = derive_rng(cfg.seed, "base", episode)
    chunk, look = sample_action(base, obs, cfg.ode_steps, base_rng)
    env_steps = 0
    ep_len, ep_renv, ep_guides = 0, 0.0, []
    last_stats: dict[str, float] = {}

    for t_macro in range(macro_total):
        o_w = build_residual_obs(obs.ee, look)
        base_sub = chunk[:n]
        bf = base.cfg.normalize(base_sub).reshape(-1)
        lam = sched.lambda_at(t_macro)
        if t_macro < sched.t_collect:
            a_res = np.zeros(5)  # warm-up tuples carry a zero residual
        else:
            a_res, _ = sample_residual(sac.actor, o_w, res_rng)

        p_start = obs.ee.position.copy()
        p_goal = goal_position(p_start, obs.ee.rotation, look.delta, reward_cfg.goal_frame)
        r_env_sum, done, success = 0.0, False, False
        for i in range(n):
            step = env.step(compose_action(base_sub[i], a_res, lam))
            env_steps += 1
            ep_len += 1
            r_env_sum += step.r_env
            obs = step.obs
            if step.terminated:
                done, success = True, step.success
                break
        ctx = GuidanceContext(p_start, p_goal, n, reward_cfg.eps)
        r_guide = guidance_reward(ctx, obs.ee.position)
        r_fin = final_reward(reward_cfg, look.progress, r_guide, r_env_sum)
        ep_renv += r_env_sum
        ep_guides.append(r_guide)

        # the next macro-step's base query doubles as the stored next-state features
        chunk2, look2 = sample_action(base, obs, cfg.ode_steps, base_rng)
        o_w2 = build_residual_obs(obs.ee, look2)
        bf2 = base.cfg.normalize(chunk2[:n]).reshape(-1)
        buffer.push(Transition(o_w, bf, a_res, o_w2, bf2, r_fin, done))

        if done:
            result.train_rows.append(
                {
                    "step": env_steps,
                    "episode": episode,
                    "success": int(success),
                    "episode_length": ep_len,
                    "r_env_sum": ep_renv,
                    "r_guide_mean": float(np.mean(ep_guides)),
                    "lambda": lam,
                    "buffer_size": buffer.size,
                    "actor_loss": last_stats.get("actor_loss", float("nan")),
                    "critic_loss": last_stats.get("critic_loss", float("nan")),
                }
            )
            episode += 1
            obs = env.reset(derive_seed(cfg.seed, "env", episode))
            base_rng = derive_rng(cfg.seed, "base", episode)
            chunk, look = sample_action(base, obs, cfg.ode_steps, base_rng)
            ep_len, ep_renv, ep_guides = 0, 0.0, []
        else:
            chunk, look = chunk2, look2

        if (t_macro + 1) % sac_cfg.train_freq == 0 and (t_macro + 1) >= sched.t_collect and buffer.size >= 2:
            last_stats = update_burst(sac, buffer, buf_rng)

        if (t_macro + 1) % eval_every_macro == 0 or t_macro + 1 == macro_total:
            report = evaluate_policy(
                base,
                cfg.task_id,
                cfg.eval_episodes,
                n_steps=n,
                ode_steps=cfg.ode_steps,
                actor=sac.actor,
                lambda_scale=sched.lambda_eval,
                batch=cfg.eval_batch,
            )
            row = {
                "env_step": env_steps,
                "macro_step": t_macro + 1,
                "lambda": sched.lambda_eval,
                "episodes": report.episodes,
                "success_rate": report.success_rate,
                "mean_success_len": report.mean_success_len if report.mean_success_len is not None else "",
            }
            result.eval_rows.append(row)
            if eval_sink is not None:
                eval_sink(row)

    result.base_frozen_ok = params_checksum(base.named_params()) == checksum_before
    result.macro_steps = macro_total
    result.env_steps = env_steps
    result.buffer = buffer
    return result


def base_rollout_outcomes(base: FlowPolicy, cfg: RefineConfig, episodes: int) -> list[tuple[bool, int]]:
    """Pure frozen-base rollouts under the refinement loop's exact seed streams.

    Episode e uses env seed derive(seed, "env", e) and base stream
    derive(seed, "base", e), queried every n_steps, so outcomes are directly
    comparable against a lambda == 0 refinement run.
    """
    task = get_task(cfg.task_id)
    env = ToyEnv(task)
    outcomes = []
    for episode in range(episodes):
        obs = env.reset(derive_seed(cfg.seed, "env", episode))
        base_rng = derive_rng(cfg.seed, "base", episode)
        steps, done, success = 0, False, False
        while not done:
            chunk, _ = sample_action(base, obs, cfg.ode_steps, base_rng)
            for i in range(cfg.n_steps):
                step = env.step(chunk[i].copy())
                steps += 1
                obs = step.obs
                if step.terminated:
                    done, success = True, step.success
                    break
        outcomes.append((success, steps))
    return outcomes
