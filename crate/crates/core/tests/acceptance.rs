//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::{BTreeSet, HashMap};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::Matrix3;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ipbind::config::RunConfig;
use ipbind::encoder::{encode, ModelConfig};
use ipbind::frames::{compute_frames, FrameMode};
use ipbind::head::{attribution_csv, export_attribution, predict, predict_prepared, ModelParams, PreparedComplex};
use ipbind::losses::{balanced_mse, rank_loss, total_loss, LossConfig};
use ipbind::molgraph::{radius_graph, DEFAULT_CUTOFF};
use ipbind::structio::{crop_pocket, PocketComplex, ResidueId};
use ipbind::synthetic::{
    random_points, random_rigid_motion, synthetic_complex, synthetic_ligand, synthetic_protein, transform_complex,
};
use ipbind::trainer::{evaluate, lr_schedule, train_epoch, Sample, TrainConfig, TrainState};

// Tolerances, one per criterion where the criterion pins a number.
const INVARIANCE_F32_REL: f64 = 1e-4;
const NONE_MODE_VIOLATION: f64 = 1e-3;
const FRAME_ORTHO: f64 = 1e-6;
const REFLECTION_REL: f64 = 1e-4;
const GRADIENT_REL: f64 = 1e-3;
const LOSS_EXACT: f64 = 1e-12;
const COSINE_MID: f64 = 1e-12;
const OVERFIT_RMSE: f64 = 0.1;
const OVERFIT_PEARSON: f64 = 0.99;
const ATTRIBUTION_REL: f64 = 1e-5;

const INVARIANCE_BUDGET: Duration = Duration::from_secs(60);
const GRADIENT_BUDGET: Duration = Duration::from_secs(120);
const OVERFIT_BUDGET: Duration = Duration::from_secs(300);

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn small_model(mode: FrameMode) -> ModelConfig {
    ModelConfig {
        hidden_dim: 32,
        num_layers: 3,
        rbf_count: 16,
        frame_mode: mode,
        ..ModelConfig::default()
    }
}

fn invariance_suite() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let complexes: Vec<PocketComplex> = (0..10).map(|_| synthetic_complex(&mut rng, 12, 8)).collect();

    let se3 = small_model(FrameMode::SE3);
    let params = ModelParams::<f64>::init(1, &se3, 1.0).cast::<f32>();
    let mut worst_rel = 0.0f64;
    let mut motions = 0;
    for pc in &complexes {
        let base = predict(pc, &params, &se3).map_err(|e| e.to_string())?.affinity;
        for _ in 0..20 {
            let (r, t) = random_rigid_motion(&mut rng, 20.0);
            let moved = predict(&transform_complex(pc, &r, &t), &params, &se3)
                .map_err(|e| e.to_string())?
                .affinity;
            worst_rel = worst_rel.max((moved - base).abs() / (1.0 + base.abs()));
            motions += 1;
        }
    }

    let none = small_model(FrameMode::None);
    let mut largest_none = 0.0f64;
    for pc in complexes.iter().take(3) {
        let base = predict(pc, &params, &none).map_err(|e| e.to_string())?.affinity;
        for _ in 0..5 {
            let (r, t) = random_rigid_motion(&mut rng, 20.0);
            let moved = predict(&transform_complex(pc, &r, &t), &params, &none)
                .map_err(|e| e.to_string())?
                .affinity;
            largest_none = largest_none.max((moved - base).abs());
        }
    }
    let elapsed = start.elapsed();
    check(
        worst_rel <= INVARIANCE_F32_REL && largest_none > NONE_MODE_VIOLATION && elapsed < INVARIANCE_BUDGET,
        format!(
            "{motions} motions, max |dy|/(1+|y|) = {worst_rel:.2e} (f32, SE3); NONE max |dy| = {largest_none:.2e}; {:.1}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn frame_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst_det = 0.0f64;
    let mut worst_ortho = 0.0f64;
    for n in [3usize, 5, 20, 100] {
        for _ in 0..25 {
            let pts = random_points(&mut rng, n, 10.0);
            let se3 = compute_frames(&pts, FrameMode::SE3).map_err(|e| e.to_string())?;
            for r in &se3.rotations {
                worst_det = worst_det.max((r.determinant() - 1.0).abs());
                worst_ortho = worst_ortho.max((r.transpose() * r - Matrix3::identity()).abs().max());
            }
            let e3 = compute_frames(&pts, FrameMode::E3).map_err(|e| e.to_string())?;
            let positive = e3.rotations.iter().filter(|r| r.determinant() > 0.0).count();
            if e3.rotations.len() != 8 || positive != 4 {
                return Err(format!("E3 gave {} frames, {positive} proper", e3.rotations.len()));
            }
        }
    }

    let e3 = small_model(FrameMode::E3);
    let params = ModelParams::<f64>::init(2, &e3, 1.0);
    let mirror = Matrix3::from_diagonal(&nalgebra::Vector3::new(-1.0, 1.0, 1.0));
    let mut worst_reflect = 0.0f64;
    for _ in 0..5 {
        let pc = synthetic_complex(&mut rng, 10, 7);
        let base = predict(&pc, &params, &e3).map_err(|e| e.to_string())?.affinity;
        let mirrored = transform_complex(&pc, &mirror, &nalgebra::Vector3::zeros());
        let y = predict(&mirrored, &params, &e3).map_err(|e| e.to_string())?.affinity;
        worst_reflect = worst_reflect.max((y - base).abs() / base.abs().max(f64::MIN_POSITIVE));
    }
    check(
        worst_det <= FRAME_ORTHO && worst_ortho <= FRAME_ORTHO && worst_reflect <= REFLECTION_REL,
        format!(
            "SE3 max |det-1| = {worst_det:.1e}, max |RtR-I| = {worst_ortho:.1e}; E3 8 frames 4+/4-; reflection rel change {worst_reflect:.1e}"
        ),
    )
}

fn energy_cancellation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let cfg = small_model(FrameMode::SE3);
    let mut params = ModelParams::<f64>::init(3, &cfg, 1.0);
    params.head.second.weight.fill(0.0);
    params.head.second.bias.fill(1.7);
    let mut nonzero = 0;
    for _ in 0..100 {
        let residues = rng.random_range(1..15);
        let lig = rng.random_range(1..12);
        let pc = synthetic_complex(&mut rng, residues, lig);
        if predict(&pc, &params, &cfg).map_err(|e| e.to_string())?.affinity != 0.0 {
            nonzero += 1;
        }
    }
    check(nonzero == 0, format!("{nonzero}/100 complexes with y != 0 under a constant head"))
}

fn graph_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut total_edges = 0;
    for trial in 0..50 {
        let pts = random_points(&mut rng, 100, 18.0);
        let g = radius_graph(vec![6; 100], pts.clone(), DEFAULT_CUTOFF).map_err(|e| e.to_string())?;
        let mut brute = BTreeSet::new();
        for i in 0..100 {
            for j in 0..100 {
                let d2: f64 = (0..3).map(|k| (pts[i][k] - pts[j][k]).powi(2)).sum();
                if i != j && d2 <= DEFAULT_CUTOFF * DEFAULT_CUTOFF {
                    brute.insert((i, j));
                }
            }
        }
        let got: BTreeSet<(usize, usize)> = g.edges.iter().copied().collect();
        if got != brute || got.len() != g.edges.len() {
            return Err(format!("cloud {trial}: {} edges vs {} brute force", g.edges.len(), brute.len()));
        }
        total_edges += brute.len();
    }
    check(true, format!("50 clouds, {total_edges} directed edges, identical sets"))
}

fn pocket_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    for trial in 0..20 {
        let residues = rng.random_range(60..=120);
        let protein = synthetic_protein(&mut rng, residues);
        let ligand_atoms = rng.random_range(5..20);
        let ligand = synthetic_ligand(&mut rng, ligand_atoms);
        let pc = crop_pocket(&protein, &ligand, 50).map_err(|e| e.to_string())?;

        let mut best: HashMap<ResidueId, f64> = HashMap::new();
        for a in &protein.atoms {
            let d = ligand
                .atoms
                .iter()
                .map(|l| (0..3).map(|k| (a.position[k] - l.position[k]).powi(2)).sum::<f64>().sqrt())
                .fold(f64::INFINITY, f64::min);
            let rid = a.residue_id.expect("synthetic residues carry ids");
            let e = best.entry(rid).or_insert(f64::INFINITY);
            *e = e.min(d);
        }
        let mut ranked: Vec<(ResidueId, f64)> = best.into_iter().collect();
        ranked.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.seq.cmp(&b.0.seq)));
        let expected: BTreeSet<i32> = ranked.iter().take(50).map(|r| r.0.seq).collect();
        let got: BTreeSet<i32> = pc
            .protein_pocket
            .atoms
            .iter()
            .map(|a| a.residue_id.expect("kept residues carry ids").seq)
            .collect();
        if got != expected {
            return Err(format!("protein {trial} ({residues} residues): pocket sets differ"));
        }
    }
    check(true, "20 proteins of 60-120 residues, nearest-50 sets identical".into())
}

fn gradient_check() -> Outcome {
    let start = Instant::now();
    let cfg = ModelConfig {
        hidden_dim: 8,
        num_layers: 1,
        rbf_count: 4,
        ..ModelConfig::default()
    };
    let loss_cfg = LossConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let samples: Vec<Sample> = (0..2)
        .map(|i| {
            let pc = synthetic_complex(&mut rng, 1, 4);
            assert!(pc.complex.len() <= 10);
            Sample {
                id: format!("g{i}"),
                prep: PreparedComplex::new(pc, &cfg).expect("valid complex"),
            }
        })
        .collect();
    let batch: Vec<&Sample> = samples.iter().collect();
    let params = ModelParams::<f64>::init(6, &cfg, 1.0);
    let (_, _, grad) =
        ipbind::trainer::batch_gradient(&batch, &params, &cfg, &loss_cfg).map_err(|e| e.to_string())?;

    let labels: Vec<f64> = samples.iter().map(|s| s.prep.label().expect("labelled")).collect();
    let loss_at = |p: &ModelParams<f64>| -> f64 {
        let preds: Vec<f64> = samples
            .iter()
            .map(|s| predict_prepared(&s.prep, p, &cfg).expect("prediction").affinity)
            .collect();
        total_loss(&preds, &labels, p.log_noise_var(), &loss_cfg).expect("loss").value
    };
    let h = 1e-6;
    let base = loss_at(&params);
    // Rounding error of the central difference itself; only matters where
    // the true gradient is (near) zero.
    let floor = 64.0 * f64::EPSILON * base.abs().max(1.0) / h;
    let analytic: Vec<Vec<f64>> = grad.slices().iter().map(|s| s.to_vec()).collect();
    let names = params.names();
    let mut checked = 0;
    let mut worst = 0.0f64;
    for (t, g) in analytic.iter().enumerate() {
        for k in 0..g.len() {
            let mut plus = params.clone();
            plus.slices_mut()[t][k] += h;
            let mut minus = params.clone();
            minus.slices_mut()[t][k] -= h;
            let numeric = (loss_at(&plus) - loss_at(&minus)) / (2.0 * h);
            let err = (g[k] - numeric).abs();
            let scale = g[k].abs().max(numeric.abs());
            if err > GRADIENT_REL * scale + floor {
                return Err(format!("{}[{k}]: analytic {} vs numeric {numeric}", names[t], g[k]));
            }
            if scale > floor / GRADIENT_REL {
                worst = worst.max(err / scale);
            }
            checked += 1;
        }
    }
    let elapsed = start.elapsed();
    check(
        elapsed < GRADIENT_BUDGET,
        format!(
            "{checked} parameters, worst relative error {worst:.1e}, floor {floor:.1e}; {:.1}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn loss_values() -> Outcome {
    let single = balanced_mse(&[3.0], &[7.0], 0.3).map_err(|e| e.to_string())?;
    let dup = balanced_mse(&[5.0, 5.0], &[5.0, 5.0], 0.0).map_err(|e| e.to_string())?;
    let at_one = rank_loss(1.0, 1.0);
    let at_zero = rank_loss(0.0, 1.0);
    let e_minus_2 = std::f64::consts::E - 2.0;
    check(
        single == 0.0
            && (dup - std::f64::consts::LN_2).abs() <= LOSS_EXACT
            && at_one.abs() <= LOSS_EXACT
            && (at_zero - e_minus_2).abs() <= LOSS_EXACT,
        format!("B=1 {single}, duplicate {dup:.15}, rank(1) {at_one}, rank(0) {at_zero:.15}"),
    )
}

fn scheduler_endpoints() -> Outcome {
    let cfg = TrainConfig {
        epochs: 100,
        warmup_epochs: 2,
        ..TrainConfig::default()
    };
    let bpe = 10;
    let first = lr_schedule(0, bpe, &cfg);
    let warm_end = lr_schedule(2 * bpe - 1, bpe, &cfg);
    // Cosine covers steps 19..=999, so progress 0.5 is step 509.
    let mid = lr_schedule(509, bpe, &cfg);
    let target = 0.5 * (cfg.peak_lr + cfg.final_lr);
    check(
        first == 1e-6 && warm_end == 0.01 && (mid - target).abs() <= COSINE_MID,
        format!("lr(0) = {first:e}, lr(end of warm-up) = {warm_end}, lr(mid) = {mid}"),
    )
}

fn overfit_run(seed: u64) -> Result<(f64, Option<f64>, usize), String> {
    let mut cfg = RunConfig::default();
    cfg.model.hidden_dim = 32;
    cfg.model.num_layers = 2;
    cfg.model.rbf_count = 16;
    cfg.train.epochs = 300;
    cfg.train.batch_size = 8;
    cfg.train.warmup_epochs = 2;
    cfg.train.peak_lr = 5e-3;
    cfg.train.seed = seed;
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let samples: Vec<Sample> = (0..8)
        .map(|i| Sample {
            id: format!("o{i}"),
            prep: PreparedComplex::new(synthetic_complex(&mut rng, 6, 6), &cfg.model).expect("valid complex"),
        })
        .collect();
    let mut state = TrainState::new(&cfg.model, &cfg.train, &cfg.loss);
    let mut epochs = 0;
    while state.epoch < cfg.train.epochs {
        train_epoch(&mut state, &samples, &cfg).map_err(|e| e.to_string())?;
        epochs += 1;
        let (_, m) = evaluate(&samples, &state.params, &cfg).map_err(|e| e.to_string())?;
        if m.rmse <= OVERFIT_RMSE && m.pearson.is_some_and(|p| p >= OVERFIT_PEARSON) {
            return Ok((m.rmse, m.pearson, epochs));
        }
    }
    let (_, m) = evaluate(&samples, &state.params, &cfg).map_err(|e| e.to_string())?;
    Ok((m.rmse, m.pearson, epochs))
}

fn overfit_sanity() -> Outcome {
    let start = Instant::now();
    let a = overfit_run(11)?;
    let b = overfit_run(11)?;
    let elapsed = start.elapsed();
    let (rmse, pearson, epochs) = a;
    let p = pearson.unwrap_or(f64::NAN);
    check(
        rmse <= OVERFIT_RMSE && p >= OVERFIT_PEARSON && a == b && elapsed < OVERFIT_BUDGET,
        format!(
            "8 complexes: train rmse {rmse:.4}, pearson {p:.4} after {epochs} epochs; rerun identical: {}; {:.1}s for both runs",
            a == b,
            elapsed.as_secs_f64()
        ),
    )
}

fn permutation_equivariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let cfg = small_model(FrameMode::SE3);
    let params = ModelParams::<f64>::init(8, &cfg, 1.0);
    let params32 = params.cast::<f32>();
    for trial in 0..10 {
        let n = rng.random_range(10..60);
        let pts = random_points(&mut rng, n, 9.0);
        let z: Vec<u8> = (0..n).map(|_| [6u8, 7, 8, 16][rng.random_range(0..4)]).collect();
        let g = radius_graph(z, pts, cfg.graph_cutoff).map_err(|e| e.to_string())?;
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let gp = g.permuted(&perm);
        let h = encode(&g, &params.encoders[0], &cfg).map_err(|e| e.to_string())?;
        let hp = encode(&gp, &params.encoders[0], &cfg).map_err(|e| e.to_string())?;
        let h32 = encode(&g, &params32.encoders[0], &cfg).map_err(|e| e.to_string())?;
        let hp32 = encode(&gp, &params32.encoders[0], &cfg).map_err(|e| e.to_string())?;
        for i in 0..n {
            if h.row(i) != hp.row(perm[i]) || h32.row(i) != hp32.row(perm[i]) {
                return Err(format!("graph {trial}: node {i} differs after relabelling"));
            }
        }
    }
    check(true, "10 graphs, encoder outputs bitwise equal after index mapping (f64 and f32)".into())
}

fn attribution_consistency() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let cfg = small_model(FrameMode::SE3);
    let params = ModelParams::<f64>::init(9, &cfg, 1.0);
    let mut worst = 0.0f64;
    for i in 0..20 {
        let (residues, ligand_atoms) = (rng.random_range(2..12), rng.random_range(2..10));
        let pc = synthetic_complex(&mut rng, residues, ligand_atoms);
        let report = predict(&pc, &params, &cfg).map_err(|e| e.to_string())?;
        let sum: f64 = report.per_atom_delta.iter().sum();
        let rel = (sum + report.affinity).abs() / report.affinity.abs().max(f64::MIN_POSITIVE);
        worst = worst.max(rel);
        let rows = export_attribution(&report, &pc).map_err(|e| e.to_string())?;
        let lines = attribution_csv(&rows).lines().count() - 1;
        if lines != pc.complex.len() {
            return Err(format!("complex {i}: {lines} CSV rows for {} atoms", pc.complex.len()));
        }
    }
    check(worst <= ATTRIBUTION_REL, format!("20 complexes, max |sum(delta) + y|/|y| = {worst:.1e}, row counts match"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("1 se3 invariance suite", invariance_suite),
        ("2 frame correctness", frame_correctness),
        ("3 energy cancellation", energy_cancellation),
        ("4 radius graph oracle", graph_oracle),
        ("5 pocket oracle", pocket_oracle),
        ("6 gradient check", gradient_check),
        ("7 loss unit values", loss_values),
        ("8 scheduler endpoints", scheduler_endpoints),
        ("9 overfit sanity", overfit_sanity),
        ("10 permutation equivariance", permutation_equivariance),
        ("11 attribution consistency", attribution_consistency),
    ];
    let only: Option<String> = std::env::args().nth(1).filter(|a| !a.starts_with('-'));
    let mut failed = 0;
    for (name, f) in criteria {
        if only.as_deref().is_some_and(|o| !name.contains(o)) {
            continue;
        }
        match f() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
