use rayon::prelude::*;
use serde_json::{json, Value};

use fblmac::approx::{fit_constants, ApproxFamily, FitNorm, FitOptions};
use fblmac::sim::{classify_stability, run_sim, SimConfig, SimVerdict};
use fblmac::stability::{baf_stable, cc_stable, tdma_stable, BafVariant};
use fblmac::throughput::{optimize_protocol, protocol_throughput, Binding, SearchBounds};
use fblmac::{CodeSpec, LinkSet, PcModel, Protocol, RelayArm, TrafficProfile};

use crate::config::{Axis, ConfigError, Scenario, SimSettings, DEFAULT_SLOTS};
use crate::error::{CliError, CliResult};
use crate::table::{real, Table};

/// Flags shared by every command.
#[derive(Debug, Clone, Copy, Default)]
pub struct Context {
    pub jobs: Option<usize>,
    pub seed: Option<u64>,
    pub relay_arm: Option<RelayArm>,
}

impl Context {
    pub fn arm(&self, scenario: &Scenario) -> RelayArm {
        self.relay_arm.or(scenario.relay_arm).unwrap_or_default()
    }

    pub fn pool(&self) -> CliResult<rayon::ThreadPool> {
        let mut b = rayon::ThreadPoolBuilder::new();
        if let Some(j) = self.jobs {
            b = b.num_threads(j);
        }
        b.build().map_err(|e| CliError::Input(format!("cannot start worker pool: {e}")))
    }
}

/// Rendered command output plus the process exit status it implies.
pub struct Output {
    pub text: String,
    pub status: i32,
}

impl Output {
    fn ok(text: String) -> Self {
        Self { text, status: 0 }
    }
}

pub const THROUGHPUT_COLUMNS: [&str; 11] = [
    "protocol", "n", "k", "L", "snr_sd", "snr_sr", "snr_rd", "model", "throughput", "binding", "is_optimal",
];

struct Point {
    protocol: Protocol,
    n: u64,
    k: u64,
    batch: u64,
    snrs: (f64, f64, f64),
    model: PcModel,
}

impl Point {
    fn row(&self, u: f64, binding: Binding, optimal: bool) -> Vec<String> {
        vec![
            self.protocol.name().into(),
            self.n.to_string(),
            self.k.to_string(),
            self.batch.to_string(),
            real(self.snrs.0),
            real(self.snrs.1),
            real(self.snrs.2),
            self.model.name().into(),
            real(u),
            binding.name().into(),
            (optimal as u8).to_string(),
        ]
    }
}

fn bounds(scenario: &Scenario, n: u64, arm: RelayArm) -> SearchBounds {
    SearchBounds {
        k_max: Some(scenario.k_max.unwrap_or(n)),
        l_max: scenario.l_max.unwrap_or(8),
        relay_arm: arm,
    }
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    s
}

/// Every candidate `(k, L)` followed by the optimum repeated with `is_optimal = 1`.
pub fn optimize(scenario: &Scenario, ctx: &Context) -> CliResult<Output> {
    let protocol = scenario.protocol()?;
    let n = scenario.n()?;
    let links = scenario.links(protocol)?;
    let snrs = scenario.snrs(protocol)?;
    let arm = ctx.arm(scenario);
    let b = bounds(scenario, n, arm);
    let best = optimize_protocol(protocol, n, &links, scenario.model, &b)?;

    let mut table = Table::new(&THROUGHPUT_COLUMNS);
    let l_max = if protocol.is_batched() { b.l_max } else { 1 };
    for batch in 1..=l_max {
        for k in 1..=b.k_max.unwrap_or(n) {
            let t = protocol_throughput(protocol, k, batch, n, &links, scenario.model, arm);
            let p = Point { protocol, n, k, batch, snrs, model: scenario.model };
            table.push(p.row(t.value, t.binding, false));
        }
    }
    let p = Point {
        protocol,
        n,
        k: best.k_star,
        batch: best.l_star,
        snrs,
        model: scenario.model,
    };
    table.push(p.row(best.u_star, best.binding, true));
    Ok(Output::ok(table.render()))
}

/// Throughput at the configured `(k, L)`.
pub fn throughput(scenario: &Scenario, ctx: &Context) -> CliResult<Output> {
    let protocol = scenario.protocol()?;
    let (n, k) = (scenario.n()?, scenario.k()?);
    let batch = scenario.batch_for(protocol)?;
    let links = scenario.links(protocol)?;
    let arm = ctx.arm(scenario);
    let t = protocol_throughput(protocol, k, batch, n, &links, scenario.model, arm);
    let best = optimize_protocol(protocol, n, &links, scenario.model, &bounds(scenario, n, arm))?;
    let optimal = best.k_star == k && best.l_star == batch;
    let p = Point {
        protocol,
        n,
        k,
        batch,
        snrs: scenario.snrs(protocol)?,
        model: scenario.model,
    };
    let mut table = Table::new(&THROUGHPUT_COLUMNS);
    table.push(p.row(t.value, t.binding, optimal));
    Ok(Output::ok(table.render()))
}

fn traffic(scenario: &Scenario) -> CliResult<TrafficProfile> {
    let la = Scenario::require(scenario.lambda_a, "lambda_a")?;
    let lb = Scenario::require(scenario.lambda_b, "lambda_b")?;
    Ok(TrafficProfile::new(la, lb, scenario.omega_a)?)
}

/// Closed-form verdicts: `(selected, alternative)` where the alternative is
/// present only for relay batching, whose relay-arm forms differ.
fn analytic(
    protocol: Protocol,
    t: &TrafficProfile,
    k: u64,
    batch: u64,
    n: u64,
    links: &LinkSet,
    model: PcModel,
    arm: RelayArm,
) -> (Value, Value, bool) {
    match protocol {
        Protocol::Nc => {
            let v = tdma_stable(t, k, k, n, &links.sd, model);
            (json!(v), Value::Null, v.stable)
        }
        Protocol::Cc => {
            let v = cc_stable(t, k, n, links, model);
            (json!(v), Value::Null, v.overall.stable)
        }
        Protocol::BafRelay | Protocol::BafSource => {
            let variant = if protocol == Protocol::BafRelay { BafVariant::Relay } else { BafVariant::Source };
            let v = baf_stable(t, k, batch, n, links, model, variant);
            let other = match arm {
                RelayArm::Unweighted => RelayArm::BatchWeighted,
                RelayArm::BatchWeighted => RelayArm::Unweighted,
            };
            let selected = v.for_arm(arm);
            (
                json!({ "relay_arm": arm.name(), "verdict": selected }),
                json!({ "relay_arm": other.name(), "verdict": v.for_arm(other), "disagree": v.disagree }),
                selected.stable,
            )
        }
    }
}

pub fn stability(scenario: &Scenario, ctx: &Context) -> CliResult<Output> {
    let protocol = scenario.protocol()?;
    let (n, k) = (scenario.n()?, scenario.k()?);
    let batch = scenario.batch_for(protocol)?;
    let links = scenario.links(protocol)?;
    let t = traffic(scenario)?;
    let arm = ctx.arm(scenario);
    let (selected, alternative, stable) = analytic(protocol, &t, k, batch, n, &links, scenario.model, arm);
    let mut out = json!({
        "protocol": protocol.name(),
        "n": n,
        "k": k,
        "L": batch,
        "lambda_a": t.lambda_a,
        "lambda_b": t.lambda_b,
        "omega_a": t.omega_a,
        "model": scenario.model.name(),
        "stable": stable,
        "analytic": selected,
    });
    if !alternative.is_null() {
        out["alternative"] = alternative;
    }
    Ok(Output::ok(pretty(&out)))
}

pub fn simulate(scenario: &Scenario, ctx: &Context) -> CliResult<Output> {
    let protocol = scenario.protocol()?;
    let (n, k) = (scenario.n()?, scenario.k()?);
    let batch = scenario.batch_for(protocol)?;
    let links = scenario.links(protocol)?;
    let t = traffic(scenario)?;
    let sim = scenario.sim.unwrap_or(SimSettings {
        slots: DEFAULT_SLOTS,
        seed: 0,
        warmup: 0.1,
    });
    let seed = ctx.seed.unwrap_or(sim.seed);
    let arm = ctx.arm(scenario);

    let code = CodeSpec::new(k, n, batch)?;
    let cfg = SimConfig::new(protocol, t, code, links, scenario.model, sim.slots, seed)?.with_warmup(sim.warmup)?;
    let report = run_sim(&cfg)?;
    let empirical = classify_stability(&report, t.total());
    let (selected, alternative, stable) = analytic(protocol, &t, k, batch, n, &links, scenario.model, arm);
    let agree = match empirical {
        SimVerdict::Stable => json!(stable),
        SimVerdict::Unstable => json!(!stable),
        SimVerdict::Indeterminate => Value::Null,
    };
    let mut out = json!({
        "protocol": protocol.name(),
        "n": n,
        "k": k,
        "L": batch,
        "snr_sd": links.sd.snr(),
        "snr_sr": links.sr.snr(),
        "snr_rd": links.rd.snr(),
        "model": scenario.model.name(),
        "lambda_a": t.lambda_a,
        "lambda_b": t.lambda_b,
        "omega_a": t.omega_a,
        "slots": sim.slots,
        "seed": seed,
        "warmup": sim.warmup,
        "report": report,
        "empirical": empirical.name(),
        "analytic_stable": stable,
        "analytic": selected,
        "agree": agree,
    });
    if !alternative.is_null() {
        out["alternative"] = alternative;
    }
    Ok(Output {
        text: pretty(&out),
        status: if empirical == SimVerdict::Indeterminate { CliError::Indeterminate.exit_code() } else { 0 },
    })
}

/// Best `k` for a fixed batch size.
fn best_k(
    protocol: Protocol,
    n: u64,
    batch: u64,
    k_max: u64,
    links: &LinkSet,
    model: PcModel,
    arm: RelayArm,
) -> (u64, fblmac::throughput::CoopThroughput) {
    let mut best = (1, protocol_throughput(protocol, 1, batch, n, links, model, arm));
    for k in 2..=k_max {
        let t = protocol_throughput(protocol, k, batch, n, links, model, arm);
        if t.value > best.1.value {
            best = (k, t);
        }
    }
    best
}

pub fn sweep(scenario: &Scenario, ctx: &Context) -> CliResult<Output> {
    let spec = scenario
        .sweep
        .clone()
        .ok_or(ConfigError::Missing { key: "axis".into() })?;
    let protocol = scenario.protocol()?;
    let arm = ctx.arm(scenario);
    let model = scenario.model;
    let pool = ctx.pool()?;

    if spec.axis == Axis::Lambda {
        let (n, k) = (scenario.n()?, scenario.k()?);
        let batch = scenario.batch_for(protocol)?;
        let links = scenario.links(protocol)?;
        let omega = scenario.omega_a;
        let mut table = Table::new(&[
            "protocol", "n", "k", "L", "lambda_a", "lambda_b", "omega_a", "model", "relay_arm", "stable", "margin",
            "binding",
        ]);
        let rows: Vec<Vec<String>> = pool.install(|| {
            spec.values
                .par_iter()
                .map(|&total| {
                    let t = TrafficProfile::new(total / 2.0, total / 2.0, omega)?;
                    let v = match protocol {
                        Protocol::Nc => tdma_stable(&t, k, k, n, &links.sd, model),
                        Protocol::Cc => cc_stable(&t, k, n, &links, model).overall,
                        Protocol::BafRelay => baf_stable(&t, k, batch, n, &links, model, BafVariant::Relay).for_arm(arm),
                        Protocol::BafSource => {
                            baf_stable(&t, k, batch, n, &links, model, BafVariant::Source).for_arm(arm)
                        }
                    };
                    let binding = serde_json::to_value(v.binding).expect("serializes");
                    Ok(vec![
                        protocol.name().into(),
                        n.to_string(),
                        k.to_string(),
                        batch.to_string(),
                        real(t.lambda_a),
                        real(t.lambda_b),
                        real(t.omega_a),
                        model.name().into(),
                        arm.name().into(),
                        (v.stable as u8).to_string(),
                        real(v.margin),
                        binding.as_str().unwrap_or_default().to_string(),
                    ])
                })
                .collect::<CliResult<Vec<_>>>()
        })?;
        for r in rows {
            table.push(r);
        }
        return Ok(Output::ok(table.render()));
    }

    let rows: Vec<Vec<String>> = pool.install(|| {
        spec.values
            .par_iter()
            .map(|&x| {
                let mut s = scenario.clone();
                match spec.axis {
                    Axis::N => s.n = Some(x as u64),
                    Axis::K => s.k = Some(x as u64),
                    Axis::L => s.batch = Some(x as u64),
                    Axis::Snr => (s.snr_sd, s.snr_sr, s.snr_rd) = (Some(x), Some(x), Some(x)),
                    Axis::Lambda => unreachable!("handled above"),
                }
                sweep_point(&s, protocol, spec.axis == Axis::L, arm)
            })
            .collect::<CliResult<Vec<_>>>()
    })?;
    let mut table = Table::new(&THROUGHPUT_COLUMNS);
    for r in rows {
        table.push(r);
    }
    Ok(Output::ok(table.render()))
}

/// Throughput at the configured `k`, or the optimum when `k` is absent.
fn sweep_point(s: &Scenario, protocol: Protocol, fixed_batch: bool, arm: RelayArm) -> CliResult<Vec<String>> {
    let n = s.n()?;
    let links = s.links(protocol)?;
    let snrs = s.snrs(protocol)?;
    let model = s.model;
    let point = |k, batch| Point { protocol, n, k, batch, snrs, model };
    if let Some(k) = s.k {
        let batch = s.batch_for(protocol)?;
        let t = protocol_throughput(protocol, k, batch, n, &links, model, arm);
        return Ok(point(k, batch).row(t.value, t.binding, false));
    }
    let k_max = s.k_max.unwrap_or(n);
    if fixed_batch {
        let batch = s.batch_for(protocol)?;
        let (k, t) = best_k(protocol, n, batch, k_max, &links, model, arm);
        return Ok(point(k, batch).row(t.value, t.binding, true));
    }
    let best = optimize_protocol(protocol, n, &links, model, &bounds(s, n, arm))?;
    Ok(point(best.k_star, best.l_star).row(best.u_star, best.binding, true))
}

pub struct FitArgs {
    pub norm: FitNorm,
    pub free_intercept: bool,
    pub step: f64,
}

pub fn fit(args: &FitArgs) -> CliResult<Output> {
    let mut table = Table::new(&["family", "norm", "intercept", "support", "objective"]);
    let norm_name = match args.norm {
        FitNorm::Squared => "squared",
        FitNorm::Absolute => "absolute",
    };
    table.comment(format!("error norm: {norm_name}"));
    table.comment(format!("quadrature step: {}", real(args.step)));
    table.comment("the quadratic intercept is always pinned at 0.5");
    for family in [ApproxFamily::Linear, ApproxFamily::Quadratic] {
        let opts = FitOptions {
            norm: args.norm,
            step: args.step,
            free_intercept: args.free_intercept && family == ApproxFamily::Linear,
            ..FitOptions::default()
        };
        let r = fit_constants(family, &opts)?;
        table.push(vec![
            match family {
                ApproxFamily::Linear => "linear".into(),
                ApproxFamily::Quadratic => "quadratic".into(),
            },
            norm_name.into(),
            real(r.intercept),
            real(r.support),
            real(r.objective),
        ]);
    }
    Ok(Output::ok(table.render()))
}
