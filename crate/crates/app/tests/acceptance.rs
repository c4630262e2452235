//! Acceptance suite: one PASS/FAIL line per primary criterion.
//!
//! Criteria that need the public dataset read it from `CARCASSWATCH_PUBLIC_DATASET`
//! (default `data/sernapesca_2023s1.csv` under the workspace root) and report
//! "not evaluated" when it is absent. The process exits non-zero when any evaluated
//! criterion fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use carcasswatch::commands;
use carcasswatch::service::{router, AppState};
use carcasswatch::views::{self, to_json};
use carcasswatch_core::gmrf::*;
use carcasswatch_core::inference::*;
use carcasswatch_core::ingest::{parse_csv, ColumnMap, DatasetSummary, RegionCode, SpeciesGroup, SummaryBy};
use carcasswatch_core::monitor::{all_charts, band_monotonicity_check, build_chart, ControlChart, WeekFlag};
use carcasswatch_core::sparse::Cholesky;
use carcasswatch_core::tweedie::{self, TweedieParams};
use carcasswatch_oracles::dense::{self, ar1_covariance, conjugate_gaussian, first_difference};
use carcasswatch_oracles::tweedie as oracle;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};

enum Verdict {
    Pass,
    Fail,
    NotEvaluated,
}

struct Check {
    verdict: Verdict,
    detail: String,
}

impl Check {
    fn from(ok: bool, detail: String) -> Self {
        Check {
            verdict: if ok { Verdict::Pass } else { Verdict::Fail },
            detail,
        }
    }

    fn not_evaluated(detail: String) -> Self {
        Check {
            verdict: Verdict::NotEvaluated,
            detail,
        }
    }
}

/// Conjunction of named sub-checks with their measured values.
struct Tally {
    ok: bool,
    parts: Vec<String>,
    started: Option<Instant>,
}

impl Tally {
    fn new() -> Self {
        Tally {
            ok: true,
            parts: Vec::new(),
            started: Some(Instant::now()),
        }
    }

    fn check(&mut self, ok: bool, what: String) {
        self.ok &= ok;
        self.parts.push(if ok { what } else { format!("{what} MISSED") });
    }

    fn within(&mut self, limit: Duration) {
        let elapsed = self.started.expect("timer").elapsed();
        self.check(elapsed < limit, format!("runtime {:.1}s < {}s", elapsed.as_secs_f64(), limit.as_secs()));
    }

    fn finish(self) -> Check {
        Check::from(self.ok, self.parts.join("; "))
    }
}

fn workspace_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn public_dataset() -> Option<PathBuf> {
    let path = std::env::var_os("CARCASSWATCH_PUBLIC_DATASET")
        .map(PathBuf::from)
        .unwrap_or_else(|| workspace_root().join("data/sernapesca_2023s1.csv"));
    path.is_file().then_some(path)
}

fn region(code: u8) -> RegionCode {
    RegionCode::new(code).unwrap()
}

// ---------------------------------------------------------------- ingestion

const REGION_TOTALS: [(u8, u64); 15] = [
    (2, 5494),
    (15, 4603),
    (3, 2014),
    (1, 1887),
    (4, 1460),
    (8, 580),
    (16, 425),
    (9, 318),
    (6, 279),
    (7, 192),
    (10, 164),
    (5, 159),
    (14, 62),
    (11, 29),
    (12, 25),
];

const GROUP_TOTALS: [(&str, u64); 6] = [("PI", 14887), ("BI", 2646), ("CE", 91), ("MU", 35), ("QU", 24), ("UND", 8)];

fn ingestion() -> Check {
    let Some(path) = public_dataset() else {
        return Check::not_evaluated("public dataset not found (set CARCASSWATCH_PUBLIC_DATASET)".into());
    };
    let mut t = Tally::new();
    let parsed = parse_csv(&path, &ColumnMap::default()).unwrap();
    let data = DatasetSummary::from_records(&parsed.records).unwrap();
    let regions = data.regions();
    let groups = data.groups();
    t.within(Duration::from_secs(10));

    let total = data.panel.total();
    t.check(total == 17_691, format!("grand total {total}"));
    let got: Vec<(u8, u64)> = regions.iter().map(|r| (r.region.code(), r.total)).collect();
    t.check(got == REGION_TOTALS, format!("region totals {got:?}"));
    for (code, expected) in GROUP_TOTALS {
        let g: SpeciesGroup = code.parse().unwrap();
        let total = groups.iter().find(|r| r.group == g).map_or(0, |r| r.total);
        t.check(total == expected, format!("{code} {total}"));
    }
    for (k, (name, expected)) in [("Otaria flavescens", 14_840u64), ("Spheniscus humboldti", 2_224)].into_iter().enumerate() {
        let row = data.species.get(k);
        let ok = row.is_some_and(|s| s.species_name.contains(name) && s.total == expected);
        t.check(ok, format!("species #{} {:?}", k + 1, row.map(|s| (&s.species_name, s.total))));
    }
    t.finish()
}

// ---------------------------------------------------------------- tweedie

fn density(params: TweedieParams) -> impl Fn(f64) -> f64 {
    move |y: f64| tweedie::log_density(y, &params).unwrap().exp()
}

/// Upper bound on the Kolmogorov–Smirnov distance between sorted draws and a distribution
/// function known on a grid, using monotonicity of both between grid points.
fn ks_upper_bound(sorted: &[f64], grid: &[f64], cdf: &[f64]) -> f64 {
    let n = sorted.len() as f64;
    let below = |x: f64| sorted.partition_point(|&s| s < x) as f64 / n;
    let at_or_below = |x: f64| sorted.partition_point(|&s| s <= x) as f64 / n;
    let mut d: f64 = (at_or_below(grid[0]) - cdf[0]).abs();
    for k in 0..grid.len() - 1 {
        d = d.max(below(grid[k + 1]) - cdf[k]);
        d = d.max(cdf[k + 1] - at_or_below(grid[k]));
        d = d.max((at_or_below(grid[k + 1]) - cdf[k + 1]).abs());
    }
    d.max(1.0 - cdf[cdf.len() - 1])
}

fn tweedie_correctness() -> Check {
    let mut t = Tally::new();
    let (mut zero_err, mut norm_err): (f64, f64) = (0.0, 0.0);
    for mu in [0.5, 2.0, 10.0] {
        for p in [1.2, 1.5, 1.9] {
            for sigma2 in [0.3, 1.0, 3.0] {
                let params = TweedieParams::new(mu, p, sigma2).unwrap();
                let closed = (-(f64::powf(mu, 2.0 - p) / (sigma2 * (2.0 - p)))).exp();
                for got in [
                    params.zero_mass(),
                    tweedie::log_density(0.0, &params).unwrap().exp(),
                    tweedie::cdf(0.0, &params),
                ] {
                    zero_err = zero_err.max((got - closed).abs());
                }
                let f = density(params);
                let mass = closed + oracle::integrate_density(&f, p, 0.0, oracle::upper_limit(mu, p, sigma2));
                norm_err = norm_err.max((mass - 1.0).abs());
            }
        }
    }
    t.check(zero_err <= 1e-12, format!("zero mass error {zero_err:.1e} <= 1e-12"));
    t.check(norm_err < 1e-6, format!("normalization error {norm_err:.1e} < 1e-6 over 27 points"));

    let mut worst_ks: f64 = 0.0;
    for (mu, p, sigma2, seed) in [(1.5, 1.92, 0.437, 1u64), (2.0, 1.5, 0.8, 2), (5.0, 1.2, 0.5, 3)] {
        let params = TweedieParams::new(mu, p, sigma2).unwrap();
        let mut draws = tweedie::sample(&params, 1_000_000, seed).unwrap();
        draws.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut grid = vec![0.0];
        grid.extend(draws.iter().copied().filter(|&y| y > 0.0).step_by(250));
        grid.push(draws[draws.len() - 1]);
        grid.dedup();
        let cdf = oracle::cdf_on_grid(&density(params), p, params.zero_mass(), &grid);
        worst_ks = worst_ks.max(ks_upper_bound(&draws, &grid, &cdf));
    }
    t.check(worst_ks < 0.005, format!("KS distance {worst_ks:.5} < 0.005 (10^6 draws)"));
    t.within(Duration::from_secs(300));
    t.finish()
}

// ---------------------------------------------------------------- gmrf

fn random_within(n: usize, seed: u64) -> SparsePrecision {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = Uniform::<f64>::new(-1.0, 1.0).unwrap();
    let mut t = Vec::new();
    for i in 0..n {
        t.push((i, i, n as f64 + 1.0));
        for j in 0..i {
            if u.sample(&mut rng) > 0.0 {
                t.push((i, j, u.sample(&mut rng)));
            }
        }
    }
    SparsePrecision::proper(carcasswatch_core::sparse::SymCsc::from_triplets(n, &t).unwrap())
}

/// Empirical correlation at the range and interior sd of SPDE draws on a regular grid.
fn spde_moments(range: f64, sd: f64) -> (f64, f64) {
    let (nx, spacing) = (61usize, 1.0);
    let mesh = Mesh::regular_grid(nx, nx, spacing).unwrap();
    let (_, q) = spde_precision(&mesh, range, sd).unwrap();
    let chol = Cholesky::new(&q.matrix, &[]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let idx = |i: usize, j: usize| j * nx + i;
    let lag = (range / spacing) as usize;
    let (lo, hi) = (20usize, 40usize);
    let (mut sxx, mut syy, mut sxy, mut var_sum, mut var_n) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for _ in 0..400 {
        let z: Vec<f64> = (0..mesh.n_vertices()).map(|_| StandardNormal.sample(&mut rng)).collect();
        let x = chol.sample_from_standard(&z);
        for j in lo..=hi {
            for i in lo..=hi {
                let v = x[idx(i, j)];
                var_sum += v * v;
                var_n += 1.0;
                for w in [x[idx(i + lag, j)], x[idx(i, j + lag)]] {
                    sxx += v * v;
                    syy += w * w;
                    sxy += v * w;
                }
            }
        }
    }
    (sxy / (sxx * syy).sqrt(), (var_sum / var_n).sqrt())
}

fn gmrf_oracles() -> Check {
    let mut t = Tally::new();
    let mut ar1_err: f64 = 0.0;
    for n in [1usize, 2, 3, 7, 20, 50] {
        for rho in [-0.8, 0.0, 0.5, 0.9, 0.99] {
            for kappa in [0.3, 1.0, 4.0] {
                let q = ar1_precision(n, rho, kappa).unwrap().matrix.to_dense();
                ar1_err = ar1_err.max((q * ar1_covariance(n, rho, kappa) - DMatrix::identity(n, n)).abs().max());
            }
        }
    }
    t.check(ar1_err < 1e-12, format!("AR(1) |QS - I| {ar1_err:.1e} < 1e-12"));

    let mut kron_err: f64 = 0.0;
    for (groups, dim, rho, seed) in [(3, 4, 0.6, 1u64), (2, 6, -0.3, 2), (4, 3, 0.95, 3), (6, 2, 0.2, 4), (1, 12, 0.5, 5)] {
        let w = random_within(dim, seed);
        let k = kron_group(&w, groups, rho).unwrap().matrix.to_dense();
        let outer = dense::ar1_precision(groups, rho, 1.0);
        kron_err = kron_err.max((k - outer.kronecker(&w.matrix.to_dense())).abs().max());
    }
    t.check(kron_err < 1e-12, format!("Kronecker error {kron_err:.1e} < 1e-12"));

    let mut rw_err: f64 = 0.0;
    for (n, prec) in [(5usize, 1.0), (5, 2.5), (12, 0.7), (26, 39.3)] {
        let eig = dense::eigenvalues(&rw1_precision(n, prec).unwrap().matrix.to_dense());
        let mut expected: Vec<f64> = (0..n)
            .map(|k| 2.0 * prec * (1.0 - (std::f64::consts::PI * k as f64 / n as f64).cos()))
            .collect();
        expected.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (a, b) in eig.iter().zip(&expected) {
            rw_err = rw_err.max((a - b).abs());
        }
    }
    t.check(rw_err < 1e-10, format!("RW(1) spectrum error {rw_err:.1e} < 1e-10"));

    let (range, sd) = (10.0, 1.5);
    let (corr, emp_sd) = spde_moments(range, sd);
    let matern = carcasswatch_oracles::special::matern1_correlation(range, range);
    t.check(
        (corr - 0.14).abs() < 0.05 && (corr - matern).abs() < 0.05,
        format!("SPDE correlation at range {corr:.4} (Matern {matern:.4}, 0.14 +- 0.05)"),
    );
    t.check((emp_sd / sd - 1.0).abs() < 0.10, format!("SPDE sd {emp_sd:.4} vs {sd} within 10%"));
    t.within(Duration::from_secs(300));
    t.finish()
}

// ---------------------------------------------------------------- laplace

struct Toy {
    spec: ModelSpec,
    op: Arc<SpdeOperator>,
    groups: usize,
    n_week: usize,
    rw_len: usize,
    rw_reps: usize,
}

/// Fixed (2) + spatial (grid mesh x groups) + AR(1) + replicated RW(1).
fn toy_spec(lik: Likelihood, n_obs: usize, seed: u64) -> Toy {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mesh = Mesh::regular_grid(4, 3, 1.0).unwrap();
    let op = Arc::new(SpdeOperator::new(&mesh).unwrap());
    let (groups, n_week, rw_len, rw_reps) = (2, 5, 3, 2);
    let blocks = vec![
        LatentBlock::fixed(&["Intercept".into(), "slope".into()], 0.01),
        LatentBlock::spatial("field", op.clone(), groups),
        LatentBlock::ar1("week", n_week),
        LatentBlock::rw1("rw", rw_len, (0..rw_reps * rw_len).map(|k| format!("rw[{k}]")).collect()),
    ];
    let offsets = [0, 2, 2 + groups * op.dim(), 2 + groups * op.dim() + n_week];
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for _ in 0..n_obs {
        let x: f64 = rng.random_range(-1.0..1.0);
        let p = [rng.random_range(0.0..3.0), rng.random_range(0.0..2.0)];
        let (t, w) = mesh.locate(p).unwrap();
        let g = rng.random_range(0..groups);
        let mut row = vec![(offsets[0], 1.0), (offsets[0] + 1, x)];
        for k in 0..3 {
            row.push((offsets[1] + g * op.dim() + mesh.triangles[t][k], w[k]));
        }
        row.push((offsets[2] + rng.random_range(0..n_week), 1.0));
        row.push((offsets[3] + rng.random_range(0..rw_len * rw_reps), 1.0));
        rows.push(row);
        y.push(match lik {
            Likelihood::Gaussian => rng.random_range(-2.0..2.0),
            Likelihood::Tweedie => {
                if rng.random_bool(0.2) {
                    0.0
                } else {
                    rng.random_range(0.1..6.0)
                }
            }
        });
    }
    Toy {
        spec: ModelSpec::new(lik, blocks, rows, y, HyperPriors::new(2.0)).unwrap(),
        op,
        groups,
        n_week,
        rw_len,
        rw_reps,
    }
}

fn toy_hyper() -> Hyperparameters {
    Hyperparameters {
        p: 1.6,
        sigma2: 0.7,
        spatial_range_km: 2.0,
        spatial_sd: 0.8,
        group_rho: 0.6,
        week_prec: 1.5,
        week_rho: 0.7,
        region_rw_prec: 2.5,
    }
}

/// Dense prior precision assembled from first principles.
fn dense_prior(toy: &Toy, h: &Hyperparameters) -> DMatrix<f64> {
    let fixed = DMatrix::identity(2, 2) * 0.01;
    let kappa = kappa_from_range(h.spatial_range_km);
    let tau = tau_from_sd(h.spatial_sd, kappa);
    let c = DMatrix::from_diagonal(&DVector::from_vec(toy.op.mass.clone()));
    let c_inv = DMatrix::from_diagonal(&DVector::from_vec(toy.op.mass.iter().map(|m| 1.0 / m).collect()));
    let g = toy.op.stiffness.to_dense();
    let qw = (&c * kappa.powi(4) + &g * (2.0 * kappa * kappa) + &g * &c_inv * &g) * (tau * tau);
    let q_group = ar1_covariance(toy.groups, h.group_rho, 1.0).try_inverse().unwrap();
    let week = ar1_covariance(toy.n_week, h.week_rho, h.week_prec).try_inverse().unwrap();
    let d = first_difference(toy.rw_len);
    let one_rw = d.transpose() * &d * h.region_rw_prec + DMatrix::from_element(toy.rw_len, toy.rw_len, SOFT_CONSTRAINT_PRECISION);
    let parts = [
        fixed,
        q_group.kronecker(&qw),
        week,
        DMatrix::<f64>::identity(toy.rw_reps, toy.rw_reps).kronecker(&one_rw),
    ];
    let n: usize = parts.iter().map(|m| m.nrows()).sum();
    let mut q = DMatrix::zeros(n, n);
    let mut off = 0;
    for m in &parts {
        q.view_mut((off, off), (m.nrows(), m.ncols())).copy_from(m);
        off += m.nrows();
    }
    q
}

fn dense_design(spec: &ModelSpec) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(spec.n_obs(), spec.dim());
    for (i, row) in spec.rows.iter().enumerate() {
        for &(j, v) in row {
            a[(i, j)] += v;
        }
    }
    a
}

fn laplace_exactness() -> Check {
    let mut t = Tally::new();
    let h = toy_hyper();
    let (mut mode_err, mut lml_err, mut mean_err, mut sd_err, mut max_dim): (f64, f64, f64, f64, usize) = (0.0, 0.0, 0.0, 0.0, 0);
    for (n_obs, seed) in [(60, 3u64), (25, 4), (120, 5)] {
        let toy = toy_spec(Likelihood::Gaussian, n_obs, seed);
        max_dim = max_dim.max(toy.spec.dim());
        let lap = Laplace::new(&toy.spec).unwrap();
        let mode = lap.find_mode(&h, &vec![0.0; toy.spec.dim()], NewtonOptions::default()).unwrap();
        let oracle = conjugate_gaussian(
            &dense_design(&toy.spec),
            &dense_prior(&toy, &h),
            h.sigma2,
            &DVector::from_vec(toy.spec.y.clone()),
        );
        for (a, b) in mode.mode.iter().zip(oracle.posterior_mean.iter()) {
            mode_err = mode_err.max((a - b).abs());
        }
        lml_err = lml_err.max((mode.log_marginal_likelihood() - oracle.log_marginal).abs());
        let via_hyper = log_marginal_hyper(&h, &toy.spec).unwrap() - log_hyperprior(&toy.spec, &h);
        lml_err = lml_err.max((via_hyper - oracle.log_marginal).abs());
        for (s, (m, v)) in latent_marginals(&toy.spec, &mode)
            .iter()
            .zip(oracle.posterior_mean.iter().zip(oracle.posterior_variance.iter()))
        {
            mean_err = mean_err.max((s.mean - m).abs());
            sd_err = sd_err.max((s.sd - v.sqrt()).abs());
        }
    }
    t.check(max_dim <= 200, format!("latent dim {max_dim} <= 200"));
    t.check(mode_err < 1e-8, format!("mode error {mode_err:.1e}"));
    t.check(lml_err < 1e-8, format!("log marginal error {lml_err:.1e}"));
    t.check(mean_err < 1e-8 && sd_err < 1e-8, format!("marginal mean/sd error {mean_err:.1e}/{sd_err:.1e} (< 1e-8)"));

    let mut worst_gap: f64 = 0.0;
    for seed in 0..12u64 {
        let lik = if seed % 2 == 0 { Likelihood::Tweedie } else { Likelihood::Gaussian };
        let toy = toy_spec(lik, 10 + 3 * seed as usize, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let x: Vec<f64> = (0..toy.spec.dim()).map(|_| rng.random_range(-0.5..0.5)).collect();
        let lap = Laplace::new(&toy.spec).unwrap();
        let g = lap.joint_gradient(&x, &h).unwrap();
        let step = 1e-5;
        for j in 0..x.len() {
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[j] += step;
            xm[j] -= step;
            let fd = (lap.joint_log_density(&xp, &h).unwrap() - lap.joint_log_density(&xm, &h).unwrap()) / (2.0 * step);
            worst_gap = worst_gap.max((g[j] - fd).abs() / g[j].abs().max(fd.abs()).max(1.0));
        }
    }
    t.check(worst_gap < 1e-5, format!("gradient vs finite differences {worst_gap:.1e} relative (< 1e-5)"));
    t.finish()
}

// ---------------------------------------------------------------- recovery

fn truth() -> Hyperparameters {
    Hyperparameters {
        p: 1.92,
        sigma2: 0.437,
        spatial_range_km: 192.0,
        spatial_sd: 1.568,
        group_rho: 0.907,
        week_prec: 1.0,
        week_rho: 0.9,
        region_rw_prec: 39.3,
    }
}

struct Recovery {
    scenario: Scenario,
    fitted: LoadedArtifact,
    elapsed: Duration,
}

fn recovery_fit() -> Recovery {
    let started = Instant::now();
    let cfg = ScenarioConfig::new(5000, 2023, truth());
    let scenario = simulate_scenario(&cfg).unwrap();
    let settings = FitSettings {
        mesh: cfg.mesh,
        ..FitSettings::default()
    };
    let artifact = fit_model(&scenario.model, None, settings, &OptimizeOptions::default()).unwrap();
    let fitted = FitArtifact::from_json(&artifact.to_json().unwrap()).unwrap().load().unwrap();
    Recovery {
        scenario,
        fitted,
        elapsed: started.elapsed(),
    }
}

/// Fraction of fresh true-model draws inside, and above, the stored bands of `cell_weeks`.
fn band_rates(r: &Recovery, cell_weeks: &[(CellKey, u32)], seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let level = r.fitted.artifact.settings.level;
    let (mut inside, mut above) = (0usize, 0usize);
    for &(c, week) in cell_weeks {
        let band = r.fitted.stored_bands(c.region, c.group, level).unwrap().unwrap()[week as usize - 1];
        let y = r.scenario.draw_count(c.region, c.group, week, &mut rng).unwrap();
        inside += usize::from(band.lower <= y && y <= band.upper);
        above += usize::from(y > band.upper);
    }
    let n = cell_weeks.len() as f64;
    (inside as f64 / n, above as f64 / n)
}

fn recovery(r: &Recovery) -> Check {
    let mut t = Tally::new();
    let h = r.fitted.hyper();
    let est = &r.fitted.artifact.hyper;
    t.check(est.converged, format!("optimizer converged after {} evaluations", est.evaluations));
    t.check((h.p - 1.92).abs() <= 0.05, format!("p {:.4} (1.92 +- 0.05)", h.p));
    t.check((h.sigma2 - 0.437).abs() <= 0.1, format!("sigma2 {:.4} (0.437 +- 0.1)", h.sigma2));
    t.check((h.group_rho - 0.907).abs() <= 0.1, format!("group_rho {:.4} (0.907 +- 0.1)", h.group_rho));

    let cells = &r.fitted.artifact.cells;
    let weeks = r.fitted.n_weeks() as u32;
    let mut rng = ChaCha8Rng::seed_from_u64(500);
    let sample: Vec<(CellKey, u32)> = (0..500)
        .map(|_| (cells[rng.random_range(0..cells.len())], rng.random_range(1..=weeks)))
        .collect();
    let (coverage, _) = band_rates(r, &sample, 501);
    let level = r.fitted.artifact.settings.level;
    t.check(
        (coverage - level).abs() <= 0.04,
        format!("{:.0}% band coverage {:.1}% over 500 cell-weeks ({:.0}% +- 4%)", level * 100.0, coverage * 100.0, level * 100.0),
    );
    let mesh = r.fitted.mesh.n_vertices();
    t.check(mesh <= 1000, format!("mesh {mesh} vertices"));
    let elapsed = r.elapsed;
    t.check(elapsed < Duration::from_secs(1800), format!("runtime {:.0}s < 1800s", elapsed.as_secs_f64()));
    t.finish()
}

// ---------------------------------------------------------------- fixed effects

fn fixed_effects() -> Check {
    let mut t = Tally::new();
    let injected: Vec<PosteriorSummary> = [
        ("Intercept", -0.246),
        ("Species_PI", -0.425),
        ("Region_9", 3.498),
        ("PI:Region_9", -1.925),
        ("Region_15", 2.525),
        ("PI:Region_15", 0.010),
    ]
    .into_iter()
    .map(|(name, mean)| PosteriorSummary::gaussian(name, mean, 0.1))
    .collect();
    let pi: SpeciesGroup = "PI".parse().unwrap();
    let r9 = expected_count(&injected, pi, region(9)).unwrap();
    let r15 = expected_count(&injected, pi, region(15)).unwrap();
    let e9 = (-0.246f64 - 0.425 + 3.498 - 1.925).exp();
    let e15 = (-0.246f64 - 0.425 + 2.525 + 0.010).exp();
    t.check(r9.to_bits() == e9.to_bits(), format!("PI region 9 {r9:.17} == {e9:.17}"));
    t.check(r15.to_bits() == e15.to_bits(), format!("PI region 15 {r15:.17} == {e15:.17}"));

    let Some(path) = public_dataset() else {
        let mut c = t.finish();
        if matches!(c.verdict, Verdict::Pass) {
            c.verdict = Verdict::NotEvaluated;
        }
        c.detail.push_str("; sign agreement not evaluated: public dataset not found");
        return c;
    };
    let parsed = parse_csv(&path, &ColumnMap::default()).unwrap();
    let data = DatasetSummary::from_records(&parsed.records).unwrap();
    let model = SurveillanceModel::from_panel(&data.panel, &MeshParams::default()).unwrap();
    let fit = fit_model(&model, Some(&data), FitSettings::default(), &OptimizeOptions::default()).unwrap();
    let mean = |name: &str| fit.fixed_effects.iter().find(|s| s.name == name).map(|s| s.mean);
    let pi2 = mean("PI:Region_2");
    let ce15 = mean("CE:Region_15");
    t.check(pi2.is_some_and(|m| m > 0.0), format!("PI:Region_2 {pi2:?} > 0"));
    t.check(ce15.is_some_and(|m| m < 0.0), format!("CE:Region_15 {ce15:?} < 0"));
    t.finish()
}

// ---------------------------------------------------------------- spc

fn observed_flag_invariant(charts: &[ControlChart]) -> (bool, usize, usize) {
    let (mut weeks, mut above) = (0, 0);
    let mut ok = true;
    for c in charts {
        for k in 0..c.weeks.len() {
            let exceeds = c.observed[k].is_some_and(|o| o > c.upper[k]);
            ok &= (c.flags[k] == WeekFlag::AboveBand) == exceeds;
            ok &= (c.flags[k] == WeekFlag::Gap) == c.observed[k].is_none();
            weeks += 1;
            above += usize::from(exceeds);
        }
    }
    (ok, weeks, above)
}

fn spc(r: &Recovery) -> Check {
    let mut t = Tally::new();
    let a = &r.fitted;
    let level = a.artifact.settings.level;
    let charts = all_charts(a, level).unwrap();
    let (ok, weeks, above) = observed_flag_invariant(&charts);
    t.check(ok, format!("flag <=> observed > upper over {weeks} chart weeks ({above} above band)"));

    let mut nested = true;
    let cells: Vec<CellKey> = a.artifact.cells.iter().copied().step_by(9).collect();
    for c in &cells {
        let levels = [0.5, level, 0.9, 0.95];
        let charts: Vec<ControlChart> = levels.iter().map(|&l| build_chart(a, c.region, c.group, l).unwrap()).collect();
        for w in charts.windows(2) {
            nested &= band_monotonicity_check(&w[0], &w[1]);
            for k in 0..w[0].weeks.len() {
                nested &= w[1].lower[k] <= w[0].lower[k] && w[0].upper[k] <= w[1].upper[k];
            }
        }
        let (flag_ok, _, _) = observed_flag_invariant(&charts);
        nested &= flag_ok;
    }
    t.check(nested, format!("bands nested across levels 0.5/{level}/0.9/0.95 for {} cells", cells.len()));

    let panel: Vec<(CellKey, u32)> = a
        .artifact
        .cells
        .iter()
        .flat_map(|&c| (1..=a.n_weeks() as u32).map(move |w| (c, w)))
        .collect();
    let (_, rate) = band_rates(r, &panel, 2024);
    let target = (1.0 - level) / 2.0;
    t.check(
        (rate - target).abs() <= 0.04,
        format!("above-band rate {:.1}% over {} simulated cell-weeks ({:.0}% +- 4%)", rate * 100.0, panel.len(), target * 100.0),
    );
    t.finish()
}

// ---------------------------------------------------------------- app

fn app_determinism() -> Check {
    let mut t = Tally::new();
    let dir = tempfile::tempdir().unwrap();
    let runs: Vec<Vec<u8>> = ["a", "b"]
        .iter()
        .map(|run| {
            let cfg = common::toy_config(&dir.path().join(run));
            commands::fit(&cfg).unwrap();
            std::fs::read(cfg.artifact_path()).unwrap()
        })
        .collect();
    t.check(runs[0] == runs[1], format!("two fits give byte-identical artifacts ({} bytes)", runs[0].len()));

    let cfg = common::toy_config(&dir.path().join("a"));
    commands::summarize(&cfg).unwrap();
    let artifact = commands::load_artifact(&cfg.artifact_path()).unwrap();
    let app = router(Arc::new(AppState {
        artifact: artifact.clone(),
        raster_deg: cfg.raster_deg,
    }));
    let runtime = tokio::runtime::Runtime::new().unwrap();
    let get = |uri: &str| runtime.block_on(common::get(&app, uri));

    let mut compared = 0;
    let mut equal = true;
    let mut queries: Vec<(CellKey, Option<f64>)> = artifact.artifact.cells.iter().map(|&c| (c, None)).collect();
    queries.push((artifact.artifact.cells[0], Some(0.5)));
    for (c, level) in queries {
        let mut cmd = common::cli();
        cmd.args(["chart", "--region", &c.region.to_string(), "--group", &c.group.to_string(), "--artifact"])
            .arg(cfg.artifact_path());
        let mut uri = format!("/chart/{}/{}", c.region, c.group);
        if let Some(l) = level {
            cmd.args(["--level", &l.to_string()]);
            uri.push_str(&format!("?level={l}"));
        }
        let out = cmd.output().unwrap();
        let (status, body) = get(&uri);
        equal &= out.status.success() && status.is_success() && common::stdout(&out).trim_end() == body;
        compared += 1;
    }
    for by in [SummaryBy::Region, SummaryBy::Group, SummaryBy::Species] {
        let name = serde_json::to_value(by).unwrap();
        let name = name.as_str().unwrap();
        let file = std::fs::read_to_string(cfg.output_dir.join(format!("summary_{name}.json"))).unwrap();
        equal &= get(&format!("/summary?by={name}")).1 == file;
        equal &= to_json(&views::summary(&artifact, by).unwrap()) == file;
        compared += 1;
    }
    equal &= get("/series").1 == std::fs::read_to_string(cfg.output_dir.join("series.json")).unwrap();
    compared += 1;
    t.check(equal, format!("CLI and service outputs identical for {compared} queries"));
    t.finish()
}

// ---------------------------------------------------------------- driver

fn run(name: &str, f: impl FnOnce() -> Check) -> bool {
    let started = Instant::now();
    let check = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Check::from(false, format!("panicked: {msg}"))
    });
    let secs = started.elapsed().as_secs_f64();
    let (tag, failed) = match check.verdict {
        Verdict::Pass => ("PASS", false),
        Verdict::Fail => ("FAIL", true),
        Verdict::NotEvaluated => ("FAIL", false),
    };
    let note = if matches!(check.verdict, Verdict::NotEvaluated) { " [not evaluated]" } else { "" };
    println!("[{tag}] {name}{note}: {} ({secs:.1}s)", check.detail);
    failed
}

fn main() {
    // The harness binary also receives libtest arguments; a listing request gets no tests.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let mut failed = false;
    failed |= run("Ingestion fidelity", ingestion);
    failed |= run("Tweedie correctness", tweedie_correctness);
    failed |= run("GMRF oracles", gmrf_oracles);
    failed |= run("Laplace exactness", laplace_exactness);
    let fit = catch_unwind(recovery_fit);
    match &fit {
        Ok(r) => {
            failed |= run("Simulation-based recovery", || recovery(r));
        }
        Err(_) => {
            failed |= run("Simulation-based recovery", || Check::from(false, "scenario fit failed".into()));
        }
    }
    failed |= run("Fixed-effect composition", fixed_effects);
    match &fit {
        Ok(r) => failed |= run("SPC contract", || spc(r)),
        Err(_) => failed |= run("SPC contract", || Check::from(false, "scenario fit failed".into())),
    }
    failed |= run("App determinism", app_determinism);
    if failed {
        std::process::exit(1);
    }
}
