//! Closed-form vertex addition versus full pseudoinverse recomputation.

use std::fmt::Write as _;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::funspace::max_abs_diff;
use crate::green::{green_direct, pinv_oracle};
use crate::network::{schrodinger_matrix, NetworkSpec};
use crate::random::{random_attachment, random_network, rng_from_seed, trial_seed, NetworkConfig};
use crate::vertex_addition::{added_vertex_pinv, attached_network, VertexAttachment};

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub sizes: Vec<usize>,
    pub anchors: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub lambda: f64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            sizes: vec![50, 100, 200],
            anchors: vec![1, 5],
            trials: 3,
            seed: 42,
            lambda: 0.0,
        }
    }
}

/// One `(n, m)` line of the report; timings are means over trials.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub n: usize,
    pub m: usize,
    pub t_update_ms: f64,
    pub t_recompute_ms: f64,
    pub speedup: f64,
    pub max_dev: f64,
}

/// Network and attachment of one trial. Depends only on the arguments.
pub fn bench_fixture(
    seed: u64,
    n: usize,
    m: usize,
    trial: usize,
    lambda: f64,
) -> (NetworkSpec, VertexAttachment) {
    let mut rng = rng_from_seed(trial_seed(seed, n, m, trial));
    let spec = random_network(
        &mut rng,
        n,
        &NetworkConfig {
            lambda,
            ..Default::default()
        },
    );
    let att = random_attachment(&mut rng, &spec, m);
    (spec, att)
}

/// Times one trial: `(t_update_ms, t_recompute_ms, max_dev)`.
pub fn run_trial(spec: &NetworkSpec, att: &VertexAttachment) -> Result<(f64, f64, f64)> {
    let g = green_direct(&schrodinger_matrix(spec), spec.lambda(), spec.weight())?;

    let start = Instant::now();
    let update = added_vertex_pinv(&g, spec, att, true)?;
    let t_update = start.elapsed().as_secs_f64() * 1e3;

    let start = Instant::now();
    let scratch = schrodinger_matrix(&attached_network(spec, att)?);
    let oracle = pinv_oracle(&scratch)?;
    let t_recompute = start.elapsed().as_secs_f64() * 1e3;

    Ok((
        t_update,
        t_recompute,
        max_abs_diff(update.kernel.as_matrix(), oracle.as_matrix()),
    ))
}

pub fn run_bench(cfg: &BenchConfig) -> Result<Vec<BenchRow>> {
    if cfg.trials == 0 {
        return Err(Error::Unsupported("bench needs at least one trial".into()));
    }
    let mut rows = Vec::new();
    for &n in &cfg.sizes {
        if n < 2 {
            return Err(Error::Unsupported(format!("bench size {n} is below 2")));
        }
        for &m in &cfg.anchors {
            if m == 0 || m > n {
                return Err(Error::Unsupported(format!(
                    "anchor count {m} must lie in 1..={n}"
                )));
            }
            let (mut upd, mut rec, mut dev) = (0.0, 0.0, 0.0_f64);
            for trial in 0..cfg.trials {
                let (spec, att) = bench_fixture(cfg.seed, n, m, trial, cfg.lambda);
                let (u, r, d) = run_trial(&spec, &att)?;
                upd += u;
                rec += r;
                dev = dev.max(d);
            }
            let t = cfg.trials as f64;
            let (t_update_ms, t_recompute_ms) = (upd / t, rec / t);
            rows.push(BenchRow {
                n,
                m,
                t_update_ms,
                t_recompute_ms,
                speedup: t_recompute_ms / t_update_ms.max(f64::MIN_POSITIVE),
                max_dev: dev,
            });
        }
    }
    Ok(rows)
}

pub fn to_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from("n,m,t_update_ms,t_recompute_ms,speedup,max_dev\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{:.6},{:.6},{:.3},{:.3e}",
            r.n, r.m, r.t_update_ms, r.t_recompute_ms, r.speedup, r.max_dev
        )
        .expect("write to string");
    }
    out
}
