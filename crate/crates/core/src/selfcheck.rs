//! Invariant suite run by `greennet selfcheck`: built-in fixtures plus seeded
//! random networks, each checked against the eigendecomposition oracle and
//! the algebraic identities behind the vertex-addition formula.

use std::fmt;

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::Result;
use crate::funspace::{inner_product, max_abs_diff, KernelOnV};
use crate::green::{green_direct, penrose_deviations, pinv_oracle, GreenOperator};
use crate::network::{schrodinger_matrix, validate_network, NetworkSpec, RawNetwork};
use crate::perturbation::{
    assemble_perturbed, build_coefficients, gram_matrix, multi_rank_update, rank_one_update,
    PerturbationFamily,
};
use crate::random::{
    random_attachment, random_network, random_non_orthogonal, random_orthogonal, rng_from_seed,
    NetworkConfig,
};
use crate::tol::{EQ_TOL, SOLVE_TOL};
use crate::vertex_addition::{
    added_vertex_pinv, attached_blocks, attached_network, derive_attachment, pendant_pinv,
    pi_family, pi_gram, sigma_decomposition_check, VertexAttachment,
};

const SYM_CHECK: f64 = 1e-10;
const COEFF_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct SelfcheckConfig {
    /// Seed of the first random case; case `i` uses `seed + i`.
    pub seed: u64,
    pub cases: usize,
    /// Tolerance for checks that go through a solve or pseudoinverse.
    pub solve_tol: f64,
    pub include_builtin: bool,
}

impl Default for SelfcheckConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            cases: 20,
            solve_tol: SOLVE_TOL,
            include_builtin: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub property: String,
    pub fixture: String,
    pub deviation: f64,
    pub tolerance: f64,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.deviation <= self.tolerance
    }
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed() { "ok  " } else { "FAIL" };
        write!(
            f,
            "{status} [{}] {}: {:.3e} (tol {:.0e})",
            self.fixture, self.property, self.deviation, self.tolerance
        )
    }
}

#[derive(Debug, Clone, Default)]
pub struct SelfcheckReport {
    pub outcomes: Vec<CheckOutcome>,
}

impl SelfcheckReport {
    pub fn all_passed(&self) -> bool {
        self.outcomes.iter().all(CheckOutcome::passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckOutcome> {
        self.outcomes.iter().filter(|o| !o.passed())
    }
}

struct Recorder<'a> {
    fixture: &'a str,
    out: &'a mut Vec<CheckOutcome>,
}

impl Recorder<'_> {
    fn check(&mut self, property: &str, deviation: f64, tolerance: f64) {
        self.out.push(CheckOutcome {
            property: property.to_owned(),
            fixture: self.fixture.to_owned(),
            deviation: if deviation.is_nan() {
                f64::INFINITY
            } else {
                deviation
            },
            tolerance,
        });
    }
}

fn builtin_fixtures() -> Vec<(String, NetworkSpec, VertexAttachment)> {
    let att = |anchors: &[(&str, f64)], w: f64| VertexAttachment {
        new_vertex: "new".into(),
        new_weight: w,
        anchors: anchors.iter().map(|(l, a)| (l.to_string(), *a)).collect(),
    };
    let p2 = RawNetwork::new(["a", "b"]).edge("a", "b", 1.0);
    let k3 = RawNetwork::new(["a", "b", "c"])
        .edge("a", "b", 1.0)
        .edge("b", "c", 1.0)
        .edge("a", "c", 1.0);
    let single = RawNetwork::new(["v"]).weight(vec![1.0]);
    vec![
        (
            "single-vertex".into(),
            validate_network(single).unwrap(),
            att(&[("v", 1.0)], 1.0),
        ),
        (
            "p2".into(),
            validate_network(p2.clone()).unwrap(),
            att(&[("a", 1.0)], 1.0),
        ),
        (
            "p2,lambda=1".into(),
            validate_network(p2.lambda(1.0)).unwrap(),
            att(&[("a", 1.0)], 1.0),
        ),
        (
            "k3".into(),
            validate_network(k3.clone()).unwrap(),
            att(&[("a", 1.0), ("b", 2.0), ("c", 0.5)], 0.8),
        ),
        (
            "k3,lambda=2".into(),
            validate_network(k3.lambda(2.0)).unwrap(),
            att(&[("b", 1.5), ("c", 1.0)], 1.2),
        ),
    ]
}

/// Network and attachment of random case `seed`.
pub fn random_case(seed: u64) -> (NetworkSpec, VertexAttachment) {
    let mut rng = rng_from_seed(seed);
    let lambda = [0.0, 0.5, 2.0][(seed % 3) as usize];
    let n = rng.random_range(2..=8);
    let spec = random_network(
        &mut rng,
        n,
        &NetworkConfig {
            lambda,
            ..Default::default()
        },
    );
    let m = rng.random_range(1..=n);
    let att = random_attachment(&mut rng, &spec, m);
    (spec, att)
}

fn check_fixture(
    rec: &mut Recorder<'_>,
    spec: &NetworkSpec,
    att: &VertexAttachment,
    seed: u64,
    cfg: &SelfcheckConfig,
) -> Result<()> {
    let n = spec.order();
    let lambda = spec.lambda();
    let lq = schrodinger_matrix(spec);
    let g = green_direct(&lq, lambda, spec.weight())?;
    check_green(rec, &lq, &g, cfg)?;
    check_perturbations(rec, &lq, &g, seed, cfg)?;

    let der = derive_attachment(spec, att)?;
    let blocks = attached_blocks(spec, &der)?;
    let scratch = schrodinger_matrix(&attached_network(spec, att)?);
    rec.check(
        "block assembly equals scratch matrix",
        blocks.assemble().max_abs_diff(&scratch)?,
        EQ_TOL,
    );

    let fam = pi_family(&der, lambda);
    let s = der.s().as_vector();
    let schur = blocks.h.as_matrix() - s * s.transpose() / der.alpha;
    let pert = assemble_perturbed(
        &lq,
        &PerturbationFamily::new(fam.pis.clone(), spec.weight())?,
    )?;
    rec.check(
        "Schur complement equals perturbed L_q",
        max_abs_diff(&schur, pert.as_matrix()),
        EQ_TOL,
    );
    rec.check(
        "projector decomposition",
        sigma_decomposition_check(&der, &fam, lambda),
        EQ_TOL,
    );
    rec.check(
        "Gram closed form",
        max_abs_diff(&pi_gram(&g, &der, &fam), &gram_matrix(&g, &fam.pis)?),
        EQ_TOL,
    );

    let mut pi_dev = 0.0_f64;
    for (k, p) in fam.pis.iter().enumerate() {
        let c = inner_product(p, spec.weight().as_function())?;
        let expect = if k < der.m() {
            (lambda / der.alpha).sqrt() * der.rho[k]
        } else {
            0.0
        };
        pi_dev = pi_dev.max((c - expect).abs());
    }
    rec.check("pi family omega products", pi_dev, EQ_TOL);

    let update = added_vertex_pinv(&g, spec, att, true)?;
    let generic = build_coefficients(
        &g,
        &PerturbationFamily::new(fam.pis.clone(), spec.weight())?,
    )?;
    let c = &update.coefficients;
    let coeff_dev = (c.h - generic.h)
        .abs()
        .max((&c.h_i - &generic.h_i).amax())
        .max(max_abs_diff(&c.h_ij, &generic.h_ij));
    rec.check("coefficient cross-check", coeff_dev, COEFF_TOL);

    let pen = penrose_deviations(&scratch, &update.kernel)?;
    rec.check(
        "vertex update Penrose identities",
        pen.iter().copied().fold(0.0, f64::max),
        cfg.solve_tol,
    );
    rec.check(
        "vertex update vs oracle",
        update.kernel.max_abs_diff(&pinv_oracle(&scratch)?)?,
        cfg.solve_tol,
    );
    if lambda > 0.0 {
        let prod = update.kernel.as_matrix() * scratch.as_matrix();
        rec.check(
            "vertex update is inverse",
            max_abs_diff(&prod, &DMatrix::identity(n + 1, n + 1)),
            cfg.solve_tol,
        );
    } else {
        rec.check(
            "vertex update annihilates omega'",
            update
                .kernel
                .apply(der.omega_prime.as_function())?
                .max_abs(),
            SYM_CHECK,
        );
        if der.m() == 1 {
            let x = spec.vertices().id(&att.anchors[0].0)?;
            let pend = pendant_pinv(&g, spec, &x, att.anchors[0].1, att.new_weight)?;
            rec.check(
                "pendant form at lambda=0",
                pend.max_deviation,
                cfg.solve_tol,
            );
        }
    }
    Ok(())
}

fn check_green(
    rec: &mut Recorder<'_>,
    lq: &KernelOnV,
    g: &GreenOperator,
    cfg: &SelfcheckConfig,
) -> Result<()> {
    let n = lq.order();
    let w = g.omega.as_vector();
    let p = w * w.transpose();
    rec.check(
        "Green kernel symmetric",
        g.kernel.symmetry_deviation(),
        SYM_CHECK,
    );
    rec.check(
        "Green kernel annihilates omega",
        (g.kernel.as_matrix() * w).amax(),
        SYM_CHECK,
    );
    let poisson = lq.as_matrix() * g.kernel.as_matrix();
    rec.check(
        "Poisson identity",
        max_abs_diff(&poisson, &(DMatrix::identity(n, n) - &p)),
        cfg.solve_tol,
    );
    let oracle = pinv_oracle(lq)?.into_matrix();
    let expect = if g.lambda > 0.0 {
        oracle - p / g.lambda
    } else {
        oracle
    };
    rec.check(
        "Green kernel vs oracle",
        max_abs_diff(g.kernel.as_matrix(), &expect),
        cfg.solve_tol,
    );
    Ok(())
}

fn check_perturbations(
    rec: &mut Recorder<'_>,
    lq: &KernelOnV,
    g: &GreenOperator,
    seed: u64,
    cfg: &SelfcheckConfig,
) -> Result<()> {
    let mut rng = rng_from_seed(seed ^ 0x5eed);
    let total = rng.random_range(1..=4);
    let m = rng.random_range(0..=total);
    let sigmas: Vec<_> = (0..total)
        .map(|k| {
            if k < m {
                random_non_orthogonal(&mut rng, &g.omega)
            } else {
                random_orthogonal(&mut rng, &g.omega)
            }
        })
        .collect();
    let first = sigmas[0].clone();
    let fam = PerturbationFamily::new(sigmas, &g.omega)?;
    let h = assemble_perturbed(lq, &fam)?;
    let x = multi_rank_update(g, &fam)?;
    let pen = penrose_deviations(&h, &x)?;
    rec.check(
        "multi-rank update Penrose identities",
        pen.iter().copied().fold(0.0, f64::max),
        cfg.solve_tol,
    );
    rec.check(
        "multi-rank update vs oracle",
        x.max_abs_diff(&pinv_oracle(&h)?)?,
        cfg.solve_tol,
    );

    let single = PerturbationFamily::new(vec![first.clone()], &g.omega)?;
    let r1 = rank_one_update(g, &first)?;
    rec.check(
        "rank-one equals singleton multi-rank",
        r1.max_abs_diff(&multi_rank_update(g, &single)?)?,
        COEFF_TOL,
    );
    Ok(())
}

pub fn run_selfcheck(cfg: &SelfcheckConfig) -> SelfcheckReport {
    let mut outcomes = Vec::new();
    let mut fixtures = Vec::new();
    if cfg.include_builtin {
        for (i, (name, spec, att)) in builtin_fixtures().into_iter().enumerate() {
            fixtures.push((name, spec, att, i as u64));
        }
    }
    for i in 0..cfg.cases as u64 {
        let seed = cfg.seed.wrapping_add(i);
        let (spec, att) = random_case(seed);
        fixtures.push((format!("seed={seed}"), spec, att, seed));
    }
    for (name, spec, att, seed) in fixtures {
        let mut rec = Recorder {
            fixture: &name,
            out: &mut outcomes,
        };
        if let Err(err) = check_fixture(&mut rec, &spec, &att, seed, cfg) {
            rec.check(&format!("error: {err}"), f64::INFINITY, 0.0);
        }
    }
    SelfcheckReport { outcomes }
}
