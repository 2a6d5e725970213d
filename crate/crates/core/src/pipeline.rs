//! End-to-end pipeline and numerical verification of the return bounds.
//!
//! The pipeline is: train a diverse ensemble -> generate one buffer per
//! policy -> (task arrives) relabel everything -> select the buffer with
//! the best average return -> train offline inside the penalized model of
//! that buffer. The verification half measures how the resulting return
//! gaps relate to occupancy distances:
//!
//! * [`verify_gap_bound`] trains offline against every buffer of a fixed
//!   task and reports, per buffer, the W1 distance to the optimal
//!   occupancy, the achieved return, the gap to the oracle return, and the
//!   rank correlation between distance and return (the bounds predict it
//!   to be strongly negative);
//! * [`regret_report`] scores a whole ensemble against a task grid: the
//!   regret of a task is the smallest W1 from any member's occupancy to
//!   the oracle's, and the worst case over the grid is the quantity the
//!   diversity objective is a surrogate for.

use crate::cem::CemConfig;
use crate::diversity::{DiversityConfig, TrainedEnsemble};
use crate::env::{
    average_return, relabel_buffer, rollout, Actor, Buffer, EnvSpec, RewardSpec, TaskSpec,
    Transition,
};
use crate::error::{Error, Result};
use crate::model::{model_build, model_query, EpisodicModel};
use crate::offline::{
    evaluate_actor, evaluate_policy, offline_template, penalized_model_return, sample_starts,
    train_offline, OfflineConfig,
};
use crate::planner::{grid_value_iteration, GridPlanner, PlannerConfig};
use crate::policy::{random_policy, PolicyParams, StochasticPolicy};
use crate::rng::{derive_seed, derive_seed2, rng_from_seed};
use crate::transport::{
    min_pairwise, occupancy_from_buffer, pairwise_w1, w1_exact, DistanceMode, EmpiricalMeasure,
    Projection,
};
use rand::Rng;

// ---------------------------------------------------------------------------
// selection and mixing

/// Argmax with ties resolved to the lowest index.
pub fn select_from_scores(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Relabels every buffer with the task and returns the index of the one
/// with the highest average return, along with all scores.
pub fn select_buffer(
    buffers: &[Buffer],
    task: &TaskSpec,
    spec: &EnvSpec,
) -> Result<(usize, Vec<f64>)> {
    if buffers.is_empty() {
        return Err(Error::InvalidArgument("no buffers to select from".into()));
    }
    let mut scores = Vec::with_capacity(buffers.len());
    for buf in buffers {
        let relabeled = relabel_buffer(buf, task, spec)?;
        scores.push(average_return(&relabeled, spec.gamma)?);
    }
    Ok((select_from_scores(&scores), scores))
}

/// Concatenates the chosen buffers, preserving episode boundaries and
/// per-transition policy provenance.
pub fn mix_buffers(buffers: &[Buffer], ids: &[usize]) -> Result<Buffer> {
    if ids.is_empty() {
        return Err(Error::InvalidArgument("mix needs at least one buffer id".into()));
    }
    let env_id = buffers[ids[0]].env_id.clone();
    let mut out = Buffer {
        env_id: env_id.clone(),
        transitions: Vec::new(),
        episode_starts: Vec::new(),
        seed: buffers[ids[0]].seed,
        policy_ids: Vec::new(),
        reward_desc: "mixed".to_string(),
    };
    for &id in ids {
        let buf = buffers
            .get(id)
            .ok_or_else(|| Error::InvalidArgument(format!("buffer id {id} out of range")))?;
        if buf.env_id != env_id {
            return Err(Error::EnvMismatch(format!("{} vs {}", buf.env_id, env_id)));
        }
        let offset = out.transitions.len();
        out.episode_starts.extend(buf.episode_starts.iter().map(|s| s + offset));
        out.transitions.extend(buf.transitions.iter().cloned());
        for pid in &buf.policy_ids {
            if !out.policy_ids.contains(pid) {
                out.policy_ids.push(*pid);
            }
        }
    }
    Ok(out)
}

/// One buffer per ensemble member, rolled out with per-policy seeds.
pub fn generate_buffers(
    policies: &[PolicyParams],
    spec: &EnvSpec,
    partial_task: Option<&TaskSpec>,
    episodes_per_buffer: usize,
    seed: u64,
) -> Result<Vec<Buffer>> {
    policies
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let reward = match partial_task {
                Some(task) => RewardSpec::Task(task),
                None => RewardSpec::None,
            };
            rollout(
                &StochasticPolicy { params: p, spec },
                spec,
                reward,
                episodes_per_buffer,
                derive_seed2(seed, 0x6E4, i as u64),
                p.id,
            )
        })
        .collect()
}

// ---------------------------------------------------------------------------
// full pipeline

/// Everything `run_all` needs, assembled from defaults and a config file.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub seed: u64,
    pub spec: EnvSpec,
    pub diversity: DiversityConfig,
    pub cem: CemConfig,
    pub offline: OfflineConfig,
    pub planner: PlannerConfig,
    pub kappa: f64,
    pub episodes_per_buffer: usize,
    /// Episodes used when evaluating trained policies.
    pub eval_episodes: usize,
    /// Support cap for report-level occupancy measures.
    pub measure_cap: usize,
    pub tasks: Vec<TaskSpec>,
}

impl RunConfig {
    pub fn new(seed: u64) -> Self {
        let spec = EnvSpec::point_mass_2d();
        let diversity = DiversityConfig { seed, ..DiversityConfig::default() };
        let cem = diversity.default_cem();
        let offline = OfflineConfig {
            cem: CemConfig { seed: derive_seed(seed, 0x0FF), ..OfflineConfig::default().cem },
            ..OfflineConfig::default()
        };
        let planner = PlannerConfig::default_for(&spec);
        let kappa = EpisodicModel::default_kappa(&spec);
        RunConfig {
            seed,
            spec,
            diversity,
            cem,
            offline,
            planner,
            kappa,
            episodes_per_buffer: 20,
            eval_episodes: 10,
            measure_cap: 2000,
            tasks: (0..6).map(|k| TaskSpec::angle(60.0 * k as f64)).collect(),
        }
    }

    /// Applies config-file overrides on top of `new(seed)` defaults.
    pub fn from_kv(kv: &crate::io::KvConfig) -> Result<Self> {
        let seed = kv.get_u64("seed", 0)?;
        let mut cfg = RunConfig::new(seed);

        cfg.spec.dt = kv.get_f64("dt", cfg.spec.dt)?;
        cfg.spec.horizon = kv.get_usize("horizon", cfg.spec.horizon)?;
        cfg.spec.gamma = kv.get_f64("gamma", cfg.spec.gamma)?;
        let b = kv.get_f64("state_bound", cfg.spec.state_bounds[0][1])?;
        cfg.spec.state_bounds = vec![[-b, b]; 2];
        let ab = kv.get_f64("action_bound", cfg.spec.action_bounds[0][1])?;
        cfg.spec.action_bounds = vec![[-ab, ab]; 2];
        cfg.spec.lipschitz_t = (1.0 + cfg.spec.dt * cfg.spec.dt).sqrt();
        cfg.spec.lipschitz_r = kv.get_f64("lipschitz_r", 1.0 / cfg.spec.dt)?;
        cfg.spec.validate()?;

        cfg.diversity.k_policies = kv.get_usize("k_policies", cfg.diversity.k_policies)?;
        cfg.diversity.rounds = kv.get_usize("rounds", cfg.diversity.rounds)?;
        cfg.diversity.lambda = kv.get_f64("lambda", cfg.diversity.lambda)?;
        cfg.diversity.eval_episodes =
            kv.get_usize("div_eval_episodes", cfg.diversity.eval_episodes)?;
        cfg.diversity.measure_cap = kv.get_usize("measure_cap", cfg.diversity.measure_cap)?;
        cfg.diversity.rbf_side = kv.get_usize("rbf_side", cfg.diversity.rbf_side)?;
        cfg.diversity.bandwidth = kv.get_f64("bandwidth", cfg.diversity.bandwidth)?;
        cfg.diversity.init_scale = kv.get_f64("init_scale", cfg.diversity.init_scale)?;
        cfg.diversity.distance = match kv.get_str("distance_mode", "sliced").as_str() {
            "exact" => crate::diversity::TrainDistance::Exact,
            "sliced" => crate::diversity::TrainDistance::Sliced {
                n_projections: kv.get_usize("n_projections", 16)?,
            },
            other => {
                return Err(Error::InvalidArgument(format!(
                    "distance_mode must be exact or sliced, got {other}"
                )))
            }
        };
        if let Some(label) = kv.get("partial_task") {
            cfg.diversity.partial_task = Some(TaskSpec::parse(label)?);
        }

        cfg.cem = cfg.diversity.default_cem();
        cfg.cem.population = kv.get_usize("div_population", cfg.cem.population)?;
        cfg.cem.iterations = kv.get_usize("div_iterations", cfg.cem.iterations)?;
        cfg.cem.elite_frac = kv.get_f64("div_elite_frac", cfg.cem.elite_frac)?;
        cfg.cem.init_std = kv.get_f64("div_init_std", cfg.cem.init_std)?;

        cfg.offline.rollout_k = kv.get_usize("rollout_k", cfg.offline.rollout_k)?;
        cfg.offline.n_start_states =
            kv.get_usize("n_start_states", cfg.offline.n_start_states)?;
        cfg.offline.gamma = cfg.spec.gamma;
        cfg.offline.cem.population = kv.get_usize("off_population", cfg.offline.cem.population)?;
        cfg.offline.cem.iterations = kv.get_usize("off_iterations", cfg.offline.cem.iterations)?;
        cfg.offline.cem.init_std = kv.get_f64("off_init_std", cfg.offline.cem.init_std)?;

        cfg.planner.resolution = kv.get_usize("grid_resolution", cfg.planner.resolution)?;
        cfg.planner.tolerance = kv.get_f64("planner_tolerance", cfg.planner.tolerance)?;
        cfg.kappa = kv.get_f64("kappa", EpisodicModel::default_kappa(&cfg.spec))?;
        cfg.episodes_per_buffer =
            kv.get_usize("episodes_per_buffer", cfg.episodes_per_buffer)?;
        cfg.eval_episodes = kv.get_usize("eval_episodes", cfg.eval_episodes)?;
        cfg.measure_cap = kv.get_usize("measure_cap", cfg.measure_cap)?;

        if let Some(tasks) = kv.get("tasks") {
            cfg.tasks = tasks
                .split_whitespace()
                .map(TaskSpec::parse)
                .collect::<Result<_>>()?;
        }
        Ok(cfg)
    }
}

/// Outcome of the offline stage for one task.
#[derive(Debug, Clone)]
pub struct TaskOutcome {
    pub task: TaskSpec,
    pub selected: usize,
    pub scores: Vec<f64>,
    pub policy: PolicyParams,
    pub eval_mean: f64,
    pub eval_std: f64,
    /// Return of an untrained random policy under the same evaluation.
    pub random_baseline: f64,
}

/// Full pipeline artifacts.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub ensemble: TrainedEnsemble,
    pub buffers: Vec<Buffer>,
    pub outcomes: Vec<TaskOutcome>,
}

/// Runs the whole pipeline once: ensemble, buffers, and one offline
/// training per task against the same generated buffers.
pub fn run_all(cfg: &RunConfig) -> Result<RunOutput> {
    let ensemble = crate::diversity::train_diverse(&cfg.spec, &cfg.diversity, &cfg.cem)?;
    let buffers = generate_buffers(
        &ensemble.policies,
        &cfg.spec,
        cfg.diversity.partial_task.as_ref(),
        cfg.episodes_per_buffer,
        cfg.seed,
    )?;

    let mut outcomes = Vec::with_capacity(cfg.tasks.len());
    for (ti, task) in cfg.tasks.iter().enumerate() {
        let (selected, scores) = select_buffer(&buffers, task, &cfg.spec)?;
        let chosen = relabel_buffer(&buffers[selected], task, &cfg.spec)?;
        let model = model_build(&chosen, cfg.kappa, cfg.spec.gamma)?;
        let mut offline = cfg.offline.clone();
        offline.cem.seed = derive_seed2(cfg.seed, 0x0FF1, ti as u64);
        let template = offline_template(&cfg.spec, selected);
        let policy = train_offline(&model, &chosen, task, &cfg.spec, &template, &offline)?;
        let (eval_mean, eval_std) =
            evaluate_policy(&policy, &cfg.spec, task, cfg.eval_episodes, derive_seed(cfg.seed, 0xE7A))?;
        let baseline_params = random_policy(
            &cfg.spec,
            cfg.diversity.rbf_side,
            cfg.diversity.bandwidth,
            cfg.diversity.init_scale,
            usize::MAX,
            &mut rng_from_seed(derive_seed2(cfg.seed, 0xBA5E, ti as u64)),
        );
        let (random_baseline, _) = evaluate_policy(
            &baseline_params,
            &cfg.spec,
            task,
            cfg.eval_episodes,
            derive_seed(cfg.seed, 0xE7A),
        )?;
        outcomes.push(TaskOutcome {
            task: task.clone(),
            selected,
            scores,
            policy,
            eval_mean,
            eval_std,
            random_baseline,
        });
    }
    Ok(RunOutput { ensemble, buffers, outcomes })
}

/// Renders the pipeline report deterministically.
pub fn report_to_string(out: &RunOutput, cfg: &RunConfig) -> String {
    use std::fmt::Write;
    let mut s = String::new();
    let _ = writeln!(s, "run report v1");
    let _ = writeln!(
        s,
        "seed={} k={} tasks={}",
        cfg.seed,
        cfg.diversity.k_policies,
        cfg.tasks.len()
    );
    let rounds = out
        .ensemble
        .round_min_pairwise
        .iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(" ");
    let _ = writeln!(s, "min_pairwise_by_round={rounds}");
    for o in &out.outcomes {
        let scores =
            o.scores.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let _ = writeln!(
            s,
            "task={} selected={} eval_mean={} eval_std={} baseline={} scores={}",
            o.task.label(),
            o.selected,
            o.eval_mean,
            o.eval_std,
            o.random_baseline,
            scores
        );
    }
    s
}

/// Writes buffers, ensemble policies, offline policies and the report
/// under `dir`; file contents depend only on the run output.
pub fn write_run_output(dir: &std::path::Path, out: &RunOutput, cfg: &RunConfig) -> Result<()> {
    let buffers_dir = dir.join("buffers");
    let policies_dir = dir.join("policies");
    let offline_dir = dir.join("offline");
    for d in [&buffers_dir, &policies_dir, &offline_dir] {
        std::fs::create_dir_all(d)?;
    }
    for (i, buf) in out.buffers.iter().enumerate() {
        crate::io::write_buffer(buf, &buffers_dir.join(format!("buffer_{i:02}.txt")))?;
    }
    for (i, p) in out.ensemble.policies.iter().enumerate() {
        crate::io::write_policy(p, &policies_dir.join(format!("policy_{i:02}.txt")))?;
    }
    for o in &out.outcomes {
        let name = o.task.label().replace([':', ','], "_");
        crate::io::write_policy(&o.policy, &offline_dir.join(format!("offline_{name}.txt")))?;
    }
    std::fs::write(dir.join("report.txt"), report_to_string(out, cfg))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// gap bound verification

/// Per-buffer record of the gap/distance measurement.
#[derive(Debug, Clone)]
pub struct GapRow {
    pub buffer_id: usize,
    /// W1 between the buffer occupancy and the oracle occupancy.
    pub d2: f64,
    /// W1 between oracle occupancies under true and learned dynamics.
    pub d1: f64,
    pub offline_return: f64,
    pub optimal_return: f64,
    pub gap: f64,
    /// `c * mean_u` along the trained policy's model rollouts.
    pub epsilon_u: f64,
    /// Diameter estimate of the buffer's state support.
    pub support_diameter: f64,
}

#[derive(Debug, Clone)]
pub struct GapReport {
    pub rows: Vec<GapRow>,
    /// Analytic constant `2 c gamma L_r L_T` (loose by construction).
    pub c_analytic: f64,
    /// Least-squares slope of gap against d2 through the origin.
    pub c_hat: f64,
    /// Spearman rank correlation between d2 and offline return.
    pub spearman: f64,
    pub c: f64,
}

/// Spearman rank correlation with average ranks on ties.
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let rank = |v: &[f64]| -> Vec<f64> {
        let n = v.len();
        let mut idx: Vec<usize> = (0..n).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut ranks = vec![0.0; n];
        let mut i = 0;
        while i < n {
            let mut j = i;
            while j + 1 < n && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for k in i..=j {
                ranks[idx[k]] = avg;
            }
            i = j + 1;
        }
        ranks
    };
    let rx = rank(xs);
    let ry = rank(ys);
    let n = xs.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        cov += (a - mx) * (b - my);
        vx += (a - mx) * (a - mx);
        vy += (b - my) * (b - my);
    }
    if vx == 0.0 || vy == 0.0 {
        return 0.0;
    }
    cov / (vx * vy).sqrt()
}

/// Occupancy of an actor rolled out through the learned model dynamics.
fn model_occupancy(
    model: &EpisodicModel,
    actor: &dyn Actor,
    spec: &EnvSpec,
    task: &TaskSpec,
    n_episodes: usize,
    seed: u64,
    projection: &Projection,
) -> Result<EmpiricalMeasure> {
    let mut transitions = Vec::with_capacity(n_episodes * spec.horizon);
    let mut episode_starts = Vec::with_capacity(n_episodes);
    for ep in 0..n_episodes {
        episode_starts.push(transitions.len());
        let mut rng = rng_from_seed(derive_seed(seed, ep as u64));
        let mut s = spec.reset_state();
        for t in 0..spec.horizon {
            let mut a = actor.act(&s, &mut rng);
            spec.clip_action(&mut a);
            let q = model_query(model, &s, &a, task, spec)?;
            transitions.push(Transition {
                s: s.clone(),
                a,
                r: q.r_raw,
                s2: q.s_next.clone(),
                t,
                done: t + 1 == spec.horizon,
                policy_id: 0,
            });
            s = q.s_next;
        }
    }
    let buf = Buffer {
        env_id: spec.id.clone(),
        transitions,
        episode_starts,
        seed,
        policy_ids: vec![0],
        reward_desc: "model-rollout".into(),
    };
    occupancy_from_buffer(&buf, spec.gamma, projection)
}

/// Max pairwise distance over a sample of the buffer's states.
fn support_diameter(buf: &Buffer, sample: usize, seed: u64) -> f64 {
    let mut rng = rng_from_seed(seed);
    let n = buf.len();
    let pts: Vec<&[f64]> = if n <= sample {
        buf.transitions.iter().map(|t| t.s.as_slice()).collect()
    } else {
        (0..sample).map(|_| buf.transitions[rng.gen_range(0..n)].s.as_slice()).collect()
    };
    let mut best: f64 = 0.0;
    for i in 0..pts.len() {
        for j in (i + 1)..pts.len() {
            let d: f64 =
                pts[i].iter().zip(pts[j]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            best = best.max(d);
        }
    }
    best
}

/// Settings shared by the two report generators.
#[derive(Debug, Clone)]
pub struct ReportOptions {
    /// Episodes of oracle rollouts used to estimate the optimal occupancy.
    pub oracle_episodes: usize,
    pub measure_cap: usize,
    pub projection: Projection,
    pub seed: u64,
    pub kappa: f64,
}

impl ReportOptions {
    pub fn new(spec: &EnvSpec, seed: u64) -> Self {
        ReportOptions {
            oracle_episodes: 50,
            measure_cap: 2000,
            projection: Projection::State,
            seed,
            kappa: EpisodicModel::default_kappa(spec),
        }
    }
}

/// Offline-trains against every buffer and relates each gap to the W1
/// distance between the buffer occupancy and the oracle occupancy.
pub fn verify_gap_bound(
    buffers: &[Buffer],
    task: &TaskSpec,
    spec: &EnvSpec,
    planner: &GridPlanner,
    offline_cfg: &OfflineConfig,
    opts: &ReportOptions,
) -> Result<GapReport> {
    if buffers.is_empty() {
        return Err(Error::InvalidArgument("gap report needs buffers".into()));
    }
    let oracle = planner.policy(spec, task);
    let oracle_buf = rollout(
        &oracle,
        spec,
        RewardSpec::Task(task),
        opts.oracle_episodes,
        derive_seed(opts.seed, 0x09AC),
        usize::MAX,
    )?;
    let rho_star = occupancy_from_buffer(&oracle_buf, spec.gamma, &opts.projection)?
        .cap_support(opts.measure_cap, derive_seed(opts.seed, 0xCA90));
    let (optimal_return, _) = evaluate_actor(&oracle, spec, task, 1, 0)?;

    let mut rows = Vec::with_capacity(buffers.len());
    for (i, buf) in buffers.iter().enumerate() {
        let occ = occupancy_from_buffer(buf, spec.gamma, &opts.projection)?
            .cap_support(opts.measure_cap, derive_seed2(opts.seed, 0xCA91, i as u64));
        let (d2, _) = w1_exact(&occ, &rho_star)?;

        let relabeled = relabel_buffer(buf, task, spec)?;
        let model = model_build(&relabeled, opts.kappa, spec.gamma)?;
        let mut off = offline_cfg.clone();
        off.cem.seed = derive_seed2(opts.seed, 0x0FF2, i as u64);
        let template = offline_template(spec, i);
        let trained = train_offline(&model, &relabeled, task, spec, &template, &off)?;
        let (offline_return, _) =
            evaluate_policy(&trained, spec, task, 10, derive_seed(opts.seed, 0xE7A1))?;

        let starts = sample_starts(&relabeled, off.n_start_states, derive_seed(off.cem.seed, 0x5747));
        let (_, mean_u) = penalized_model_return(
            &trained,
            &model,
            &starts,
            task,
            spec,
            &off,
            derive_seed(opts.seed, 0xE0),
        )?;
        let c = 1.0 / (1.0 - spec.gamma);

        let model_rho = model_occupancy(
            &model,
            &oracle,
            spec,
            task,
            opts.oracle_episodes.min(10),
            derive_seed(opts.seed, 0xD1),
            &opts.projection,
        )?
        .cap_support(opts.measure_cap, derive_seed(opts.seed, 0xD1CA));
        let (d1, _) = w1_exact(&rho_star, &model_rho)?;

        rows.push(GapRow {
            buffer_id: i,
            d2,
            d1,
            offline_return,
            optimal_return,
            gap: optimal_return - offline_return,
            epsilon_u: c * mean_u,
            support_diameter: support_diameter(buf, 400, derive_seed(opts.seed, 0xB0)),
        });
    }

    let c = 1.0 / (1.0 - spec.gamma);
    let c_analytic = 2.0 * c * spec.gamma * spec.lipschitz_r * spec.lipschitz_t;
    let num: f64 = rows.iter().map(|r| r.gap * r.d2).sum();
    let den: f64 = rows.iter().map(|r| r.d2 * r.d2).sum();
    let c_hat = if den > 0.0 { num / den } else { 0.0 };
    let d2s: Vec<f64> = rows.iter().map(|r| r.d2).collect();
    let rets: Vec<f64> = rows.iter().map(|r| r.offline_return).collect();
    Ok(GapReport { spearman: spearman(&d2s, &rets), rows, c_analytic, c_hat, c })
}

pub fn gap_report_to_string(report: &GapReport) -> String {
    use std::fmt::Write;
    let mut s = String::new();
    let _ = writeln!(s, "gap report v1");
    let _ = writeln!(
        s,
        "c={} c_analytic={} c_hat={} spearman={}",
        report.c, report.c_analytic, report.c_hat, report.spearman
    );
    for r in &report.rows {
        let _ = writeln!(
            s,
            "buffer={} d2={} d1={} offline_return={} optimal_return={} gap={} epsilon_u={} support_diameter={}",
            r.buffer_id, r.d2, r.d1, r.offline_return, r.optimal_return, r.gap, r.epsilon_u,
            r.support_diameter
        );
    }
    s
}

// ---------------------------------------------------------------------------
// worst-case regret

#[derive(Debug, Clone)]
pub struct RegretRow {
    pub task: TaskSpec,
    pub best_member: usize,
    /// `min_i W1(rho_i, rho*)` for this task.
    pub regret: f64,
    /// W1 between two halves of the oracle sample; the resolution floor
    /// below which regrets are indistinguishable from zero.
    pub noise_floor: f64,
}

#[derive(Debug, Clone)]
pub struct RegretReport {
    pub rows: Vec<RegretRow>,
    /// Max regret over the task grid; a lower bound on the true worst case
    /// because the grid is finite.
    pub worst_case: f64,
    /// The ensemble's packing score `min_{i != j} W1(rho_i, rho_j)`.
    pub surrogate_score: f64,
}

/// Scores ensemble occupancies against oracle occupancies on a task grid.
pub fn regret_report(
    measures: &[EmpiricalMeasure],
    tasks: &[TaskSpec],
    spec: &EnvSpec,
    planner_cfg: &PlannerConfig,
    opts: &ReportOptions,
) -> Result<RegretReport> {
    if measures.is_empty() {
        return Err(Error::InvalidArgument("regret report needs measures".into()));
    }
    if tasks.is_empty() {
        return Err(Error::InvalidArgument("regret report needs tasks".into()));
    }
    let mut rows = Vec::with_capacity(tasks.len());
    for (ti, task) in tasks.iter().enumerate() {
        let planner = grid_value_iteration(spec, task, planner_cfg)?;
        let oracle = planner.policy(spec, task);
        let buf = rollout(
            &oracle,
            spec,
            RewardSpec::Task(task),
            opts.oracle_episodes,
            derive_seed2(opts.seed, 0x9E9, ti as u64),
            usize::MAX,
        )?;
        let rho_star = occupancy_from_buffer(&buf, spec.gamma, &opts.projection)?
            .cap_support(opts.measure_cap, derive_seed2(opts.seed, 0x9ECA, ti as u64));

        // noise floor: distance between the two halves of the oracle sample
        let half = opts.oracle_episodes / 2;
        let noise_floor = if half >= 1 {
            let halves: Vec<Buffer> = {
                let cut = buf.episode_starts[half];
                let first = Buffer {
                    transitions: buf.transitions[..cut].to_vec(),
                    episode_starts: buf.episode_starts[..half].to_vec(),
                    ..buf.clone()
                };
                let second = Buffer {
                    transitions: buf.transitions[cut..].to_vec(),
                    episode_starts: buf.episode_starts[half..]
                        .iter()
                        .map(|s| s - cut)
                        .collect(),
                    ..buf.clone()
                };
                vec![first, second]
            };
            let a = occupancy_from_buffer(&halves[0], spec.gamma, &opts.projection)?
                .cap_support(opts.measure_cap, derive_seed(opts.seed, 0xF1));
            let b = occupancy_from_buffer(&halves[1], spec.gamma, &opts.projection)?
                .cap_support(opts.measure_cap, derive_seed(opts.seed, 0xF2));
            w1_exact(&a, &b)?.0
        } else {
            0.0
        };

        let mut regret = f64::INFINITY;
        let mut best_member = 0;
        for (i, m) in measures.iter().enumerate() {
            let (d, _) = w1_exact(m, &rho_star)?;
            if d < regret {
                regret = d;
                best_member = i;
            }
        }
        rows.push(RegretRow { task: task.clone(), best_member, regret, noise_floor });
    }
    let worst_case = rows.iter().map(|r| r.regret).fold(f64::NEG_INFINITY, f64::max);
    let surrogate_score = if measures.len() >= 2 {
        min_pairwise(&pairwise_w1(measures, DistanceMode::Exact)?)
    } else {
        0.0
    };
    Ok(RegretReport { rows, worst_case, surrogate_score })
}

pub fn regret_report_to_string(report: &RegretReport) -> String {
    use std::fmt::Write;
    let mut s = String::new();
    let _ = writeln!(s, "regret report v1");
    let _ = writeln!(
        s,
        "worst_case={} surrogate_score={}",
        report.worst_case, report.surrogate_score
    );
    for r in &report.rows {
        let _ = writeln!(
            s,
            "task={} best_member={} regret={} noise_floor={}",
            r.task.label(),
            r.best_member,
            r.regret,
            r.noise_floor
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::ChaCha8Rng;

    fn spec() -> EnvSpec {
        EnvSpec::point_mass_2d()
    }

    fn drift_buffer(direction: [f64; 2], seed: u64, episodes: usize, pid: usize) -> Buffer {
        let sp = spec();
        let drift = move |_s: &[f64], _rng: &mut ChaCha8Rng| direction.to_vec();
        rollout(&drift, &sp, RewardSpec::None, episodes, seed, pid).unwrap()
    }

    #[test]
    fn selection_takes_argmax_with_low_tie() {
        assert_eq!(select_from_scores(&[3.0, 7.0, 5.0]), 1);
        assert_eq!(select_from_scores(&[4.0, 4.0]), 0);
        assert_eq!(select_from_scores(&[1.0]), 0);
    }

    #[test]
    fn selection_is_scale_invariant() {
        let scores = [0.5, -2.0, 3.5, 3.5, 1.0];
        let pick = select_from_scores(&scores);
        for factor in [0.1, 2.0, 117.0] {
            let scaled: Vec<f64> = scores.iter().map(|s| s * factor + 5.0).collect();
            assert_eq!(select_from_scores(&scaled), pick);
        }
    }

    #[test]
    fn select_buffer_prefers_aligned_drift() {
        let sp = spec();
        let buffers = vec![
            drift_buffer([0.0, -1.0], 1, 2, 0),
            drift_buffer([0.0, 1.0], 2, 2, 1),
            drift_buffer([1.0, 0.0], 3, 2, 2),
        ];
        let (idx, scores) = select_buffer(&buffers, &TaskSpec::angle(0.0), &sp).unwrap();
        assert_eq!(idx, 1);
        assert!(scores[1] > scores[0] && scores[1] > scores[2]);
        // empty list errors
        assert!(select_buffer(&[], &TaskSpec::angle(0.0), &sp).is_err());
    }

    #[test]
    fn mixing_concatenates_and_tracks_provenance() {
        let a = drift_buffer([1.0, 0.0], 1, 2, 0);
        let b = drift_buffer([0.0, 1.0], 2, 3, 1);
        let solo = mix_buffers(&[a.clone(), b.clone()], &[0]).unwrap();
        assert_eq!(solo.transitions, a.transitions);
        let mixed = mix_buffers(&[a.clone(), b.clone()], &[0, 1]).unwrap();
        assert_eq!(mixed.len(), a.len() + b.len());
        assert_eq!(mixed.n_episodes(), a.n_episodes() + b.n_episodes());
        assert_eq!(mixed.policy_ids, vec![0, 1]);
        // env mismatch
        let mut alien = b.clone();
        alien.env_id = "other".into();
        assert!(mix_buffers(&[a, alien], &[0, 1]).is_err());
    }

    #[test]
    fn mixture_occupancy_is_weighted_mixture_of_parts() {
        let sp = spec();
        let a = drift_buffer([1.0, 0.0], 5, 1, 0);
        let b = drift_buffer([0.0, 1.0], 6, 2, 1);
        let mixed = mix_buffers(&[a.clone(), b.clone()], &[0, 1]).unwrap();
        let occ = occupancy_from_buffer(&mixed, sp.gamma, &Projection::State).unwrap();
        let occ_a = occupancy_from_buffer(&a, sp.gamma, &Projection::State).unwrap();
        let occ_b = occupancy_from_buffer(&b, sp.gamma, &Projection::State).unwrap();
        // equal-length episodes: weights proportional to episode counts
        let wa = 1.0 / 3.0;
        for i in 0..occ_a.n() {
            assert!((occ.weights()[i] - wa * occ_a.weights()[i]).abs() < 1e-9);
        }
        for j in 0..occ_b.n() {
            assert!((occ.weights()[occ_a.n() + j] - (1.0 - wa) * occ_b.weights()[j]).abs() < 1e-9);
        }
    }

    #[test]
    fn spearman_detects_monotone_relations() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert!((spearman(&xs, &[10.0, 20.0, 30.0, 40.0]) - 1.0).abs() < 1e-12);
        assert!((spearman(&xs, &[5.0, 4.0, 3.0, 1.0]) + 1.0).abs() < 1e-12);
        let flat = [2.0, 2.0, 2.0, 2.0];
        assert_eq!(spearman(&xs, &flat), 0.0);
    }

    #[test]
    fn run_config_kv_overrides() {
        let kv = crate::io::KvConfig::parse(
            "seed = 3\nk_policies = 4\nrounds = 1\ntasks = angle:0 angle:180\ngamma = 0.95\n",
        )
        .unwrap();
        let cfg = RunConfig::from_kv(&kv).unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.diversity.k_policies, 4);
        assert_eq!(cfg.tasks.len(), 2);
        assert_eq!(cfg.spec.gamma, 0.95);
        assert_eq!(cfg.offline.gamma, 0.95);
    }
}
