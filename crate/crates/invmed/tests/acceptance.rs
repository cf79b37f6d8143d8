//! Acceptance suite: ten end-to-end criteria covering special functions,
//! the forward solver, the derivative, the weight selection, the
//! reconstruction algorithms, and reproducibility. Each test prints one
//! `ACCEPTANCE <id> <name> PASS|FAIL` line (run with `--nocapture` to see
//! them); tolerances and configurations are pinned in the individual tests.
//!
//! Run with `cargo test --test acceptance -- --nocapture`.

mod common;

use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use invmed::forward::{
    born_map, forward_map, sample_medium, FineGrid, ForwardSolver,
};
use invmed::grid::{characteristic_medium, make_directions, make_grid, ShapeId, ShapeTag};
use invmed::harness::{generate_data, run_reconstruction, ExperimentConfig};
use invmed::jacobian::ScatteringModel;
use invmed::kalman::kfl_run;
use invmed::linalg::GmresOptions;
use invmed::regularize::{
    flm_run, morozov_alpha, Algorithm, LmConfig, NoiseWeight, NormalEquations,
};
use invmed::C64;

// ---- reporting helper --------------------------------------------------------------

struct Criterion {
    id: usize,
    name: &'static str,
    budget_seconds: f64,
    started: Instant,
    failures: Vec<String>,
}

impl Criterion {
    fn start(id: usize, name: &'static str, budget_seconds: f64) -> Self {
        Criterion { id, name, budget_seconds, started: Instant::now(), failures: Vec::new() }
    }

    fn check(&mut self, ok: bool, message: String) {
        if !ok {
            self.failures.push(message);
        }
    }

    fn finish(mut self) {
        let elapsed = self.started.elapsed().as_secs_f64();
        self.check(
            elapsed < self.budget_seconds,
            format!("runtime {elapsed:.1}s exceeds the {:.0}s budget", self.budget_seconds),
        );
        let ok = self.failures.is_empty();
        println!(
            "ACCEPTANCE {} {} {} ({elapsed:.1}s)",
            self.id,
            self.name,
            if ok { "PASS" } else { "FAIL" }
        );
        assert!(
            ok,
            "criterion {} ({}) failed:\n  {}",
            self.id,
            self.name,
            self.failures.join("\n  ")
        );
    }
}

fn desk_config() -> ExperimentConfig {
    // The reference desk scale: k=3, S=3, M=8, J=N=30, r=3, 128-node
    // inversion grid with period 24, data generated at 256 nodes.
    ExperimentConfig::default()
}

fn desk_model(config: &ExperimentConfig) -> ScatteringModel {
    ScatteringModel::new(
        config.k,
        config.cell_grid().unwrap(),
        config.inversion_grid().unwrap(),
        make_directions(config.n).unwrap(),
        make_directions(config.j).unwrap(),
        config.gmres(),
    )
    .unwrap()
}

// ---- criterion 1: special functions ---------------------------------------------------

#[test]
fn acceptance_1_special_functions() {
    let mut c = Criterion::start(1, "special-functions", 1.0);

    let overlap = common::oracle_self_check();
    c.check(overlap < 1e-13, format!("oracle routes disagree by {overlap:.3e}"));

    // 200 log-spaced arguments across [1e-3, 500].
    let lo = 1e-3_f64.ln();
    let hi = 500.0_f64.ln();
    let mut worst_hankel: f64 = 0.0;
    let mut worst_wronskian: f64 = 0.0;
    for i in 0..200 {
        let z = (lo + (hi - lo) * i as f64 / 199.0).exp();
        let reference = common::hankel0_oracle(z);
        let value = invmed::specfun::hankel0_first(z).unwrap();
        worst_hankel = worst_hankel.max((value - reference).norm());

        // J1 Y0 - J0 Y1 = 2 / (pi z).
        let wronskian = invmed::specfun::bessel_j1(z).unwrap()
            * invmed::specfun::bessel_y0(z).unwrap()
            - invmed::specfun::bessel_j0(z).unwrap() * invmed::specfun::bessel_y1(z).unwrap();
        let exact = 2.0 / (std::f64::consts::PI * z);
        worst_wronskian = worst_wronskian.max((wronskian - exact).abs() / exact);
    }
    c.check(
        worst_hankel <= 1e-10,
        format!("worst absolute Hankel defect {worst_hankel:.3e} exceeds 1e-10"),
    );
    c.check(
        worst_wronskian <= 1e-8,
        format!("worst relative Wronskian defect {worst_wronskian:.3e} exceeds 1e-8"),
    );
    c.finish();
}

// ---- criterion 2: forward solver residual -----------------------------------------------

#[test]
fn acceptance_2_solver_residual() {
    let mut c = Criterion::start(2, "solver-residual", 10.0);
    let config = desk_config();
    let truth = config.truth().unwrap();
    let solver = ForwardSolver::new(
        &truth,
        config.k,
        config.inversion_grid().unwrap(),
        config.gmres(),
    )
    .unwrap();
    let directions = make_directions(config.n).unwrap();
    let fields = solver.solve_many(&directions).unwrap();
    let worst = fields.iter().map(|f| f.residual()).fold(0.0_f64, f64::max);
    c.check(
        worst < 1e-8,
        format!("worst verified solve residual {worst:.3e} is not below 1e-8"),
    );

    // Dense-factorization oracle on a 16x16 grid. The Krylov side runs at a
    // tolerance well inside the 1e-9 agreement bound; the production 1e-8
    // stopping rule is covered by the residual check above.
    let fine = FineGrid::new(16, 12.0).unwrap();
    let tight = GmresOptions { tol: 1e-12, ..GmresOptions::default() };
    let small = ForwardSolver::new(&truth, config.k, fine, tight).unwrap();
    let mut worst_dense: f64 = 0.0;
    for i in 0..3 {
        let d = directions.direction(i * 7);
        let iterative = small.solve(d).unwrap();
        let dense = small.solve_dense(d).unwrap();
        let scale = dense.values().iter().map(|z| z.norm()).fold(0.0_f64, f64::max);
        let diff = iterative
            .values()
            .iter()
            .zip(dense.values())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0_f64, f64::max);
        worst_dense = worst_dense.max(diff / scale);
    }
    c.check(
        worst_dense <= 1e-9,
        format!("Krylov vs dense-factorization defect {worst_dense:.3e} exceeds 1e-9"),
    );
    c.finish();
}

// ---- criterion 3: Born validation -----------------------------------------------------

#[test]
fn acceptance_3_born_validation() {
    let mut c = Criterion::start(3, "born-validation", 60.0);

    // Forward-direction far field of the disk at contrast 1e-3, k = 3.
    // Analytic small-contrast value: (k^2 / 4pi) * q * area = 0.003375.
    // M = 64 cells resolve the disk boundary to a 0.41% area defect, and the
    // 512-node grid (period 12) subdivides each cell into exactly 4x4 nodes,
    // so quadrature adds no further area error.
    let grid = make_grid(3.0, 64).unwrap();
    let disk = characteristic_medium(&ShapeId::new(ShapeTag::B1, C64::new(1e-3, 0.0)), grid);
    let fine = FineGrid::new(512, 12.0).unwrap();
    let single = make_directions(1).unwrap();
    let set = forward_map(&disk, 3.0, fine, GmresOptions::default(), &single, &single).unwrap();
    let value = set.value(0, 0);
    let analytic = 0.003375;
    let defect = (value - Complex64::new(analytic, 0.0)).norm() / analytic;
    c.check(
        defect <= 0.01,
        format!("forward-direction far field {value} deviates {defect:.4} from {analytic}"),
    );

    // Born-defect decay: the relative defect of the Born map against the full
    // solve shrinks linearly with the contrast.
    let grid = make_grid(3.0, 8).unwrap();
    let fine = FineGrid::new(128, 24.0).unwrap();
    let dirs = make_directions(8).unwrap();
    let mut relative = Vec::new();
    for contrast in [1e-2, 1e-3, 1e-4] {
        let medium =
            characteristic_medium(&ShapeId::new(ShapeTag::B1, C64::new(contrast, 0.0)), grid);
        let full =
            forward_map(&medium, 3.0, fine, GmresOptions::default(), &dirs, &dirs).unwrap();
        let born = born_map(&medium, 3.0, fine, &dirs, &dirs).unwrap();
        let defect = (full.stacked() - born.stacked()).norm();
        relative.push(defect / full.stacked().norm());
    }
    for pair in relative.windows(2) {
        let ratio = pair[1] / pair[0];
        c.check(
            (0.03..=0.35).contains(&ratio),
            format!(
                "Born defect ratio {ratio:.4} between contrast decades is not linear \
                 (defects: {relative:?})"
            ),
        );
    }
    c.finish();
}

// ---- criterion 4: reciprocity -----------------------------------------------------------

#[test]
fn acceptance_4_reciprocity() {
    let mut c = Criterion::start(4, "reciprocity", 60.0);
    let config = desk_config();
    let truth = config.truth().unwrap();
    let dirs = make_directions(30).unwrap();
    let set = forward_map(
        &truth,
        config.k,
        config.inversion_grid().unwrap(),
        config.gmres(),
        &dirs,
        &dirs,
    )
    .unwrap();
    let scale = set.matrix().iter().map(|z| z.norm()).fold(0.0_f64, f64::max);
    let mut worst: f64 = 0.0;
    for j in 0..30 {
        for n in 0..30 {
            let neg_j = dirs.negation_index(j).unwrap();
            let neg_n = dirs.negation_index(n).unwrap();
            let defect = (set.value(j, n) - set.value(neg_n, neg_j)).norm();
            worst = worst.max(defect / scale);
        }
    }
    c.check(
        worst <= 1e-6,
        format!("worst relative reciprocity defect {worst:.3e} exceeds 1e-6"),
    );
    c.finish();
}

// ---- criterion 5: derivative finite-difference order --------------------------------------

#[test]
fn acceptance_5_frechet_finite_difference() {
    let mut c = Criterion::start(5, "frechet-order", 120.0);
    // An 8-direction model on a 64-node grid keeps each forward map cheap;
    // the derivative order is grid-independent.
    let grid = make_grid(3.0, 8).unwrap();
    let fine = FineGrid::new(64, 24.0).unwrap();
    let dirs = make_directions(8).unwrap();
    let model = ScatteringModel::new(
        3.0,
        grid,
        fine,
        dirs.clone(),
        dirs,
        GmresOptions::default(),
    )
    .unwrap();
    let truth = characteristic_medium(&ShapeId::new(ShapeTag::B1, C64::new(0.1, 0.0)), grid);
    let half: DVector<C64> =
        DVector::from_column_slice(truth.values()).map(|z| z * C64::new(0.5, 0.0));
    let zero: DVector<C64> = DVector::zeros(model.state_dim());
    let mut rng = ChaCha8Rng::seed_from_u64(41);

    for (label, base_state) in [("q0=0", &zero), ("q0=true/2", &half)] {
        let base = model.medium_from_state(base_state).unwrap();
        let lin = model.assemble(&base).unwrap();
        let f_base = lin.base_farfield().stacked();
        for trial in 0..5 {
            let direction: DVector<C64> = DVector::from_fn(model.state_dim(), |_, _| {
                C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
            });
            let defect = |eps: f64| -> f64 {
                let state = base_state + direction.clone() * C64::new(eps, 0.0);
                let medium = model.medium_from_state(&state).unwrap();
                let full = model.forward_medium(&medium).unwrap().stacked();
                let predicted = &f_base + lin.apply(&(direction.clone() * C64::new(eps, 0.0)));
                (full - predicted).norm()
            };
            let ratio = defect(1e-2) / defect(1e-3);
            c.check(
                (50.0..=200.0).contains(&ratio),
                format!("defect ratio {ratio:.1} outside [50, 200] at {label}, trial {trial}"),
            );
        }
    }
    c.finish();
}

// ---- criterion 6: kernel identity -----------------------------------------------------------

#[test]
fn acceptance_6_kernel_identity() {
    let mut c = Criterion::start(6, "kernel-identity", 30.0);
    // Tiny setting where a dense factorization of the transposed system is
    // exact arithmetic territory: 4x4 cells, 8x8 fine nodes, period 12.
    let k = 3.0;
    let grid = make_grid(3.0, 2).unwrap();
    let fine = FineGrid::new(8, 12.0).unwrap();
    let observations = make_directions(8).unwrap();
    let incidents = make_directions(2).unwrap();
    let model = ScatteringModel::new(
        k,
        grid,
        fine,
        incidents,
        observations.clone(),
        GmresOptions::default(),
    )
    .unwrap();
    let medium = characteristic_medium(&ShapeId::new(ShapeTag::B1, C64::new(0.1, 0.0)), grid);

    // Route 1: reciprocity fields solved by the periodized-kernel Krylov path.
    let primary = model.kernel_matrix(&medium).unwrap();

    // Route 2: dense point-source solves of the transposed system.
    // K(x_j, y_m) = phi_j^T (I - k^2 Q C)^{-1} e_{p_m}, with phi_j the
    // conjugate plane wave, C the dense convolution matrix, Q = diag(q), and
    // p_m the fine node nearest the cell center.
    let nodes = fine.node_count();
    let kernel = invmed::forward::HelmholtzKernel::new(k, fine).unwrap();
    let mut c_dense = DMatrix::<C64>::zeros(nodes, nodes);
    for p in 0..nodes {
        let mut unit = vec![C64::new(0.0, 0.0); nodes];
        unit[p] = C64::new(1.0, 0.0);
        let column = kernel.convolve(&unit);
        for (row, value) in column.into_iter().enumerate() {
            c_dense[(row, p)] = value;
        }
    }
    let q_fine = sample_medium(&medium, &fine);
    let mut system = DMatrix::<C64>::identity(nodes, nodes);
    for row in 0..nodes {
        for col in 0..nodes {
            system[(row, col)] -= C64::new(k * k, 0.0) * q_fine[row] * c_dense[(row, col)];
        }
    }
    let lu = system.lu();
    let cells = grid.num_cells();
    let centers = grid.centers();
    let mut oracle = DMatrix::<C64>::zeros(observations.len(), cells);
    for (m, center) in centers.iter().enumerate() {
        let (i1, i2) = fine.nearest_node(*center);
        let p = fine.node_index(i1, i2);
        let mut source = DVector::<C64>::zeros(nodes);
        source[p] = C64::new(1.0, 0.0);
        let psi = lu.solve(&source).expect("dense system is invertible");
        for j in 0..observations.len() {
            let d = observations.direction(j);
            let mut sum = C64::new(0.0, 0.0);
            for i1 in 0..fine.n() {
                for i2 in 0..fine.n() {
                    let node = fine.node(i1, i2);
                    let phase = -k * (d[0] * node[0] + d[1] * node[1]);
                    sum += C64::from_polar(1.0, phase) * psi[fine.node_index(i1, i2)];
                }
            }
            oracle[(j, m)] = sum;
        }
    }

    let scale = oracle.iter().map(|z| z.norm()).fold(0.0_f64, f64::max);
    let mut worst: f64 = 0.0;
    for j in 0..observations.len() {
        for m in 0..cells {
            let defect = (primary[(j, m)] - oracle[(j, m)]).norm();
            let denom = oracle[(j, m)].norm().max(1e-3 * scale);
            worst = worst.max(defect / denom);
        }
    }
    c.check(
        worst <= 1e-6,
        format!("worst entrywise kernel defect {worst:.3e} exceeds 1e-6"),
    );
    c.finish();
}

// ---- criterion 7: sweep equivalence ------------------------------------------------------------

#[test]
fn acceptance_7_sweep_equivalence() {
    let mut c = Criterion::start(7, "kfl-flm-equivalence", 600.0);
    let config = ExperimentConfig { sigma: 0.01, ..desk_config() };
    let data = generate_data(&config).unwrap();
    let model = desk_model(&config);
    let columns = data.noisy.columns();
    let initial = DVector::zeros(model.state_dim());
    let weight = NoiseWeight::new(config.r).unwrap();
    let lm = LmConfig { max_outer: 3, ..LmConfig::default() };
    // The equivalence is stated for a shared weight sequence, so both runs
    // take the same explicit schedule; weight selection is covered elsewhere.
    let schedule = [4.0, 1.5, 0.7];

    let flm = flm_run(&model, &columns, &initial, None, weight, &lm, Some(&schedule)).unwrap();
    c.check(!flm.blew_up && !flm.stagnated, "full-data run stopped early".into());
    let kfl = kfl_run(&model, &columns, &initial, None, weight, &lm, Some(&schedule)).unwrap();
    c.check(!kfl.blew_up && !kfl.stagnated, "sweep run stopped early".into());

    for i in 0..3 {
        let full = &flm.iterates[i + 1];
        let sweep = &kfl.iterates[i + 1];
        let rel = (sweep - full).norm() / full.norm();
        c.check(
            rel <= 1e-8,
            format!("sweep iterate {i} deviates from the stacked update by {rel:.3e}"),
        );
    }
    c.finish();
}

// ---- criterion 8: discrepancy principle ---------------------------------------------------------

#[test]
fn acceptance_8_morozov() {
    let mut c = Criterion::start(8, "morozov", 300.0);

    // Scalar closed forms: for the unweighted system A = 1, d = 1 the
    // discrepancy equation has the exact solution alpha = rho / (1 - rho).
    for rho in [0.4, 0.5, 0.8] {
        let equations = NormalEquations::new(
            DMatrix::from_element(1, 1, C64::new(1.0, 0.0)),
            DVector::from_element(1, C64::new(1.0, 0.0)),
            NoiseWeight::new(1.0).unwrap(),
        )
        .unwrap();
        let lm = LmConfig { rho, ..LmConfig::default() };
        let result = morozov_alpha(&equations, &lm).unwrap();
        let exact = rho / (1.0 - rho);
        let alpha_defect = (result.alpha - exact).abs() / exact;
        c.check(
            alpha_defect <= 1e-2,
            format!("scalar alpha {} deviates {alpha_defect:.3e} from {exact}", result.alpha),
        );
        let eq_defect = (result.discrepancy - result.target).abs() / result.target;
        c.check(
            eq_defect <= 1e-3,
            format!("scalar discrepancy equation off by {eq_defect:.3e} at rho={rho}"),
        );
        c.check(!result.clamped, format!("scalar search clamped at rho={rho}"));
    }

    // Embedded: weights selected inside an actual outer loop satisfy the
    // discrepancy equation at desk scale.
    let config = ExperimentConfig { sigma: 0.01, ..desk_config() };
    let data = generate_data(&config).unwrap();
    let model = desk_model(&config);
    let weight = NoiseWeight::new(config.r).unwrap();
    let lm = LmConfig::default();
    let stacked_data = data.noisy.stacked();
    let mut phi: DVector<C64> = DVector::zeros(model.state_dim());
    for outer in 0..2 {
        let medium = model.medium_from_state(&phi).unwrap();
        let lin = model.assemble(&medium).unwrap();
        let residual = &stacked_data - lin.base_farfield().stacked();
        let equations = NormalEquations::new(lin.stacked(), residual, weight).unwrap();
        let result = morozov_alpha(&equations, &lm).unwrap();
        let eq_defect = (result.discrepancy - result.target).abs() / result.target;
        c.check(
            eq_defect <= 1e-3,
            format!("embedded discrepancy equation off by {eq_defect:.3e} at outer {outer}"),
        );
        c.check(!result.clamped, format!("embedded search clamped at outer {outer}"));
        phi += equations.solve(result.alpha).unwrap();
    }
    c.finish();
}

// ---- criterion 9: end-to-end error trend ---------------------------------------------------------

#[test]
fn acceptance_9_error_trend() {
    let mut c = Criterion::start(9, "error-trend", 1800.0);
    for shape in [ShapeTag::B1, ShapeTag::B2] {
        for k in [3.0, 7.0] {
            let base = ExperimentConfig { shape, k, sigma: 0.01, ..desk_config() };

            // Extended Kalman filter with initial weight 50: error drops by
            // the third sweep.
            let ekf_config = ExperimentConfig { iters: 3, alpha0: 50.0, ..base.clone() };
            let data = generate_data(&ekf_config).unwrap();
            let report = run_reconstruction(&ekf_config, &data, Algorithm::Ekf).unwrap();
            c.check(!report.blew_up, format!("ekf blew up at {shape:?}, k={k}"));
            let e = report.mse_history();
            let (e0, e3) = (e[0].unwrap(), e.get(3).and_then(|m| *m).unwrap_or(f64::MAX));
            c.check(
                e3 < e0,
                format!("ekf error did not drop at {shape:?}, k={k}: e0={e0:.4}, e3={e3:.4}"),
            );

            // Kalman-filtered Levenberg-Marquardt with rho = 0.4: error drops
            // by the fifth outer iteration.
            let kfl_config = ExperimentConfig { iters: 5, rho: 0.4, ..base.clone() };
            let report = run_reconstruction(&kfl_config, &data, Algorithm::Kfl).unwrap();
            c.check(!report.blew_up, format!("kfl blew up at {shape:?}, k={k}"));
            let e = report.mse_history();
            let (e0, e5) = (e[0].unwrap(), e.get(5).and_then(|m| *m).unwrap_or(f64::MAX));
            c.check(
                e5 < e0,
                format!("kfl error did not drop at {shape:?}, k={k}: e0={e0:.4}, e5={e5:.4}"),
            );
        }
    }

    // High noise robustness: at sigma = 0.1 (with the matching gentle initial
    // weight 5) the filter completes all ten sweeps without the blow-up
    // safeguard firing.
    let noisy_config = ExperimentConfig {
        sigma: 0.1,
        alpha0: 5.0,
        iters: 10,
        ..desk_config()
    };
    let data = generate_data(&noisy_config).unwrap();
    let report = run_reconstruction(&noisy_config, &data, Algorithm::Ekf).unwrap();
    c.check(!report.blew_up, "high-noise ekf run triggered the blow-up detector".into());
    c.check(
        report.last_iter() == 10,
        format!("high-noise ekf run stopped at iteration {}", report.last_iter()),
    );
    c.finish();
}

// ---- criterion 10: determinism ---------------------------------------------------------------------

#[test]
fn acceptance_10_determinism() {
    let mut c = Criterion::start(10, "determinism", 300.0);
    let config = ExperimentConfig {
        m: 4,
        j: 8,
        n: 8,
        iters: 2,
        fine_grid: 32,
        period_factor: 4.0,
        sigma: 0.01,
        seed: 3,
        verbose_trace: true,
        ..ExperimentConfig::default()
    };
    let base = std::env::temp_dir().join(format!("invmed-acceptance-10-{}", std::process::id()));
    let dir_a = base.join("a");
    let dir_b = base.join("b");
    for dir in [&dir_a, &dir_b] {
        if dir.exists() {
            std::fs::remove_dir_all(dir).unwrap();
        }
        invmed::harness::run_compare(&config, dir).unwrap();
    }

    fn gather(root: &std::path::Path, prefix: &std::path::Path, out: &mut Vec<std::path::PathBuf>) {
        for entry in std::fs::read_dir(root.join(prefix)).unwrap() {
            let entry = entry.unwrap();
            let rel = prefix.join(entry.file_name());
            if entry.file_type().unwrap().is_dir() {
                gather(root, &rel, out);
            } else {
                out.push(rel);
            }
        }
    }
    let mut files_a = Vec::new();
    let mut files_b = Vec::new();
    gather(&dir_a, std::path::Path::new(""), &mut files_a);
    gather(&dir_b, std::path::Path::new(""), &mut files_b);
    files_a.sort();
    files_b.sort();
    c.check(
        files_a == files_b,
        format!("file sets differ: {files_a:?} vs {files_b:?}"),
    );
    c.check(!files_a.is_empty(), "comparison produced no files".into());

    for rel in &files_a {
        let a = std::fs::read(dir_a.join(rel)).unwrap();
        let b = std::fs::read(dir_b.join(rel)).unwrap();
        if rel.file_name().is_some_and(|n| n == "mse.csv") {
            // The seconds column records wall-clock time and is exempt; all
            // numeric content must match byte for byte.
            let a = common::blank_last_column(&String::from_utf8(a).unwrap());
            let b = common::blank_last_column(&String::from_utf8(b).unwrap());
            c.check(a == b, format!("{} differs beyond the timing column", rel.display()));
        } else {
            c.check(a == b, format!("{} differs between identical runs", rel.display()));
        }
    }
    c.finish();
}
