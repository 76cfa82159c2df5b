//! The experiment commands behind the CLI subcommands.
//!
//! Every command is a pure function of its config: identical configs and
//! seeds produce byte-identical CSV trees. Per-seed runs execute
//! concurrently; outputs are collected and written in seed order.

use crate::calibration::{ece, fit_histogram, fit_isotonic, fit_temperature, find_swap_temperatures, tempered_msp};
use crate::curves::{empirical_curve, ranked_indices};
use crate::decomposition::decompose;
use crate::error::{Error, Result};
use crate::harness::config::{shift_by_name, ExperimentConfig, ScoreConfig, TaskConfig};
use crate::harness::pipeline::{
    eval_pair, mean_se, paired_diff, prepare_seed, summarize, train_for_seed, PairEval, SeedData,
};
use crate::harness::report::{sanitize, ReportRow, RunReport};
use crate::losspred::{
    loss_features_dataset, train_loss_predictor_traced, EvalSet,
};
use crate::models::{train_ensemble, TrainedModel};
use crate::scoring::{Predictor, ScoreFunction, SelectivePair};
use crate::synthdata::{apply_shift, mmd_rbf, Bandwidth, LabeledDataset, PosteriorOracle};
use rayon::prelude::*;
use std::path::{Path, PathBuf};

fn out_root(cfg: &ExperimentConfig) -> PathBuf {
    PathBuf::from(&cfg.out_dir)
}

fn seed_dir(cfg: &ExperimentConfig, setting: &str, seed: u64) -> PathBuf {
    out_root(cfg).join(sanitize(setting)).join(format!("seed_{seed}"))
}

fn build_pair(
    score: ScoreConfig,
    model: &TrainedModel,
    oracle: &PosteriorOracle,
) -> Result<SelectivePair> {
    let predictor = Predictor::Single(model.clone());
    let score_fn = match score {
        ScoreConfig::Msp => ScoreFunction::Msp,
        ScoreConfig::NegSelfEntropy => ScoreFunction::NegSelfEntropy,
        ScoreConfig::OracleEtaH => ScoreFunction::OracleEtaH(oracle.clone()),
        ScoreConfig::EnsembleMeanMsp | ScoreConfig::EnsembleNegVariance => {
            return Err(Error::Config("ensemble scores need the ensemble pipeline".into()));
        }
    };
    SelectivePair::new(predictor, score_fn)
}

fn write_pair_outputs(dir: &Path, eval: &PairEval, sd: &SeedData) -> Result<()> {
    crate::scoring::write_scored_csv(&eval.scored, &dir.join("scored.csv"))?;
    eval.curve.write_csv(&dir.join("curve.csv"))?;
    eval.gap.write_csv(&dir.join("gap.csv"))?;
    sd.split.write_csv(&dir.join("split_indices.csv"))?;
    Ok(())
}

/// Generate the per-seed datasets: the full draw plus the three split files
/// and the recorded split indices.
pub fn cmd_gen_data(cfg: &ExperimentConfig) -> Result<()> {
    cfg.validate()?;
    for &seed in &cfg.seeds {
        let sd = prepare_seed(cfg, &cfg.task, seed)?;
        let dir = seed_dir(cfg, "data", seed);
        sd.train.write_csv(&dir.join("train.csv"))?;
        sd.val.write_csv(&dir.join("val.csv"))?;
        sd.test.write_csv(&dir.join("test.csv"))?;
        sd.split.write_csv(&dir.join("split_indices.csv"))?;
        println!(
            "gen-data: seed={seed} train={} val={} test={}",
            sd.train.len(),
            sd.val.len(),
            sd.test.len()
        );
    }
    Ok(())
}

/// Train every configured model on every seed's training split and store
/// the weight files plus the per-epoch loss traces.
pub fn cmd_train(cfg: &ExperimentConfig) -> Result<()> {
    cfg.validate()?;
    let num_classes = cfg.task.num_classes();
    for &seed in &cfg.seeds {
        let sd = prepare_seed(cfg, &cfg.task, seed)?;
        for model_cfg in &cfg.models {
            let spec = model_cfg.to_spec(2, num_classes)?;
            let model = train_for_seed(&spec, &cfg.train, &sd.train, seed)?;
            let setting = format!("model={}", spec.name());
            let dir = seed_dir(cfg, &setting, seed);
            model.write(&dir.join("model.txt"))?;
            let mut trace = String::from("epoch,loss\n");
            for (e, l) in model.train_loss_trace().iter().enumerate() {
                trace.push_str(&format!("{e},{}\n", crate::io_util::fmt_f64(*l)));
            }
            crate::io_util::write_atomic(&dir.join("loss_trace.csv"), &trace)?;
            println!(
                "train: seed={seed} model={} final_loss={:.6}",
                spec.name(),
                model.final_train_loss().unwrap_or(f64::NAN)
            );
        }
    }
    Ok(())
}

/// Score the test split with the first configured model and score kind and
/// write the scored rows, the accuracy-coverage curve, and the gap curve.
pub fn cmd_curve(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let hash = cfg.hash();
    let score = *cfg.scores.first().unwrap_or(&ScoreConfig::Msp);
    let results: Result<Vec<ReportRow>> = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let sd = prepare_seed(cfg, &cfg.task, seed)?;
            let spec = cfg.models[0].to_spec(2, cfg.task.num_classes())?;
            let model = train_for_seed(&spec, &cfg.train, &sd.train, seed)?;
            let pair = build_pair(score, &model, &sd.oracle)?;
            let eval = eval_pair(&pair, &sd.test)?;
            let setting = format!("score={}", pair.score_fn().name());
            write_pair_outputs(&seed_dir(cfg, &setting, seed), &eval, &sd)?;
            let mut row = ReportRow::new(&hash, seed, setting);
            row.a_full = eval.a_full;
            row.aurc = eval.aurc;
            row.e_aurc = eval.e_aurc;
            Ok(row)
        })
        .collect();
    let report = RunReport { rows: results? };
    report.write_csv(&out_root(cfg).join("report.csv"))?;
    for row in &report.rows {
        println!(
            "curve: seed={} a_full={:.4} aurc={:.4} e_aurc={:.4}",
            row.seed, row.a_full, row.aurc, row.e_aurc
        );
    }
    Ok(report)
}

/// Decompose the gap on the test split, per seed, and write the
/// per-coverage CSV rows alongside the curve outputs.
pub fn cmd_decompose(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let hash = cfg.hash();
    let score = *cfg.scores.first().unwrap_or(&ScoreConfig::Msp);
    let results = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let sd = prepare_seed(cfg, &cfg.task, seed)?;
            let spec = cfg.models[0].to_spec(2, cfg.task.num_classes())?;
            let model = train_for_seed(&spec, &cfg.train, &sd.train, seed)?;
            let pair = build_pair(score, &model, &sd.oracle)?;
            let eval = eval_pair(&pair, &sd.test)?;
            let dec = decompose(&sd.test, &sd.oracle, &pair, &cfg.coverage_grid, cfg.delta)?;
            let setting = format!("score={}", pair.score_fn().name());
            let dir = seed_dir(cfg, &setting, seed);
            write_pair_outputs(&dir, &eval, &sd)?;
            dec.write_csv(&dir.join("decomposition.csv"))?;
            let s = summarize(&dec);
            let mut row = ReportRow::new(&hash, seed, setting);
            row.a_full = eval.a_full;
            row.aurc = eval.aurc;
            row.e_aurc = eval.e_aurc;
            row.eps_bayes_mean = Some(s.eps_bayes_mean);
            row.eps_approx_mean = Some(s.eps_approx_mean);
            row.eps_rank_mean = Some(s.eps_rank_mean);
            row.holds_frac = Some(s.holds_frac);
            Ok((row, s.residual_mean))
        })
        .collect::<Result<Vec<_>>>();
    let results = results?;
    let report = RunReport { rows: results.iter().map(|(r, _)| r.clone()).collect() };
    report.write_csv(&out_root(cfg).join("report.csv"))?;
    for (row, residual) in &results {
        println!(
            "decompose: seed={} e_aurc={:.4} holds_frac={:.3} residual_slack={:.4}",
            row.seed,
            row.e_aurc,
            row.holds_frac.unwrap_or(f64::NAN),
            residual,
        );
    }
    Ok(report)
}

/// Per-sample MSP confidences and correctness on a dataset.
fn msp_rows(model: &TrainedModel, data: &LabeledDataset) -> Result<(Vec<f64>, Vec<bool>)> {
    let mut confidences = Vec::with_capacity(data.len());
    let mut correct = Vec::with_capacity(data.len());
    for (x, &y) in data.features().iter().zip(data.labels()) {
        let p = model.predict_proba(x)?;
        let j = crate::models::argmax(&p);
        confidences.push(p[j]);
        correct.push(j == y);
    }
    Ok((confidences, correct))
}

/// Upper bound on |E-AURC(a) - E-AURC(b)| for two score vectors over the
/// same predictions: the coverage integral of s(k)/k, where s(k) is the
/// size of the symmetric difference (one side) of the two top-k acceptance
/// sets. Zero exactly when the two rankings agree at every prefix.
pub fn eaurc_difference_bound(scores_a: &[f64], scores_b: &[f64]) -> Result<f64> {
    if scores_a.len() != scores_b.len() || scores_a.is_empty() {
        return Err(Error::invalid("scores", "need matching nonempty score vectors"));
    }
    let n = scores_a.len();
    let order_a = ranked_indices(scores_a);
    let order_b = ranked_indices(scores_b);
    let mut in_a = vec![false; n];
    let mut in_b = vec![false; n];
    let mut overlap = 0usize;
    let mut values = Vec::with_capacity(n);
    for k in 0..n {
        let a = order_a[k];
        let b = order_b[k];
        if a == b {
            in_a[a] = true;
            in_b[b] = true;
            overlap += 1;
        } else {
            in_a[a] = true;
            if in_b[a] {
                overlap += 1;
            }
            in_b[b] = true;
            if in_a[b] {
                overlap += 1;
            }
        }
        let s = (k + 1) - overlap;
        values.push(s as f64 / (k + 1) as f64);
    }
    // Same quadrature as the E-AURC integral itself.
    let h = 1.0 / n as f64;
    let mut total = values[0] * h;
    for w in values.windows(2) {
        total += 0.5 * (w[0] + w[1]) * h;
    }
    Ok(total)
}

struct CalibSeedOut {
    rows: Vec<ReportRow>,
    swap_bound: f64,
    e_msp: f64,
    e_temp: f64,
    e_de: f64,
    ece_msp: f64,
    ece_temp: f64,
    swap_pair_fraction: f64,
    curves_identical: bool,
}

/// Calibration study: MSP vs temperature scaling vs deep ensembles, with
/// both ECE and E-AURC per seed. Asserts the study's trend contract:
/// temperature scaling must not move the selective curve beyond the
/// measured swap-mass bound (and not at all for binary tasks), must not
/// worsen ECE (2 SE), and the ensemble must not worsen E-AURC (2 SE).
pub fn cmd_calibration_study(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let hash = cfg.hash();
    let num_classes = cfg.task.num_classes();
    let per_seed: Result<Vec<CalibSeedOut>> = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let sd = prepare_seed(cfg, &cfg.task, seed)?;
            let spec = cfg.models[0].to_spec(2, num_classes)?;
            let model = train_for_seed(&spec, &cfg.train, &sd.train, seed)?;

            // MSP baseline.
            let msp_pair = build_pair(ScoreConfig::Msp, &model, &sd.oracle)?;
            let msp_eval = eval_pair(&msp_pair, &sd.test)?;
            let (conf_msp, correct) = msp_rows(&model, &sd.test)?;
            let rep_msp = ece(&conf_msp, &correct, cfg.ece_bins)?;

            // Temperature scaling fitted on the validation split.
            let val_logits: Result<Vec<Vec<f64>>> =
                sd.val.features().iter().map(|x| model.logits(x)).collect();
            let fit = fit_temperature(&val_logits?, sd.val.labels(), None)?;
            let temp_scores: Result<Vec<f64>> = sd
                .test
                .features()
                .iter()
                .map(|x| tempered_msp(&model.logits(x)?, fit.t))
                .collect();
            let temp_scores = temp_scores?;
            let temp_scored: Vec<(f64, bool)> =
                temp_scores.iter().zip(&correct).map(|(&s, &c)| (s, c)).collect();
            let temp_curve = empirical_curve(&temp_scored)?;
            let temp_gap = crate::curves::gap_curve(&temp_curve);
            let rep_temp = ece(&temp_scores, &correct, cfg.ece_bins)?;

            // Deep ensemble with the mean-MSP score.
            let ensemble = train_ensemble(&spec, &cfg.train.with_seed(seed), &sd.train, cfg.ensemble_size)?;
            let de_pair = SelectivePair::new(
                Predictor::Ensemble(ensemble),
                ScoreFunction::EnsembleMeanMsp,
            )?;
            let de_eval = eval_pair(&de_pair, &sd.test)?;
            let de_conf: Vec<f64> = de_eval.scored.iter().map(|r| r.0).collect();
            let de_correct: Vec<bool> = de_eval.scored.iter().map(|r| r.1).collect();
            let rep_de = ece(&de_conf, &de_correct, cfg.ece_bins)?;

            // How far may temperature scaling move the curve?
            let msp_scores: Vec<f64> = msp_eval.scored.iter().map(|r| r.0).collect();
            let swap_bound = eaurc_difference_bound(&msp_scores, &temp_scores)?;

            // Re-ranking diagnostic: pairwise swap detection between T=1 and
            // the fitted temperature on a subsample.
            let swap_pair_fraction =
                swap_fraction(&model, &sd.test, fit.t, 200.min(sd.test.len()))?;

            let curves_identical = msp_eval
                .curve
                .points()
                .iter()
                .zip(temp_curve.points())
                .all(|(p, q)| p.coverage == q.coverage && p.accuracy == q.accuracy);

            // Outputs.
            for (name, eval_curve, eval_gapc, rep) in [
                ("msp", &msp_eval.curve, &msp_eval.gap, &rep_msp),
                ("temp", &temp_curve, &temp_gap, &rep_temp),
                ("de", &de_eval.curve, &de_eval.gap, &rep_de),
            ] {
                let dir = seed_dir(cfg, &format!("score={name}"), seed);
                eval_curve.write_csv(&dir.join("curve.csv"))?;
                eval_gapc.write_csv(&dir.join("gap.csv"))?;
                rep.write_csv(&dir.join("reliability.csv"))?;
                sd.split.write_csv(&dir.join("split_indices.csv"))?;
            }

            let mk = |setting: &str, a_full: f64, aurc_v: f64, e_aurc: f64, ece_v: f64| {
                let mut row = ReportRow::new(&hash, seed, setting);
                row.a_full = a_full;
                row.aurc = aurc_v;
                row.e_aurc = e_aurc;
                row.ece = Some(ece_v);
                row
            };
            let temp_aurc = crate::curves::aurc(&temp_curve);
            let rows = vec![
                mk("score=msp", msp_eval.a_full, msp_eval.aurc, msp_eval.e_aurc, rep_msp.ece),
                mk("score=temp", temp_curve.a_full(), temp_aurc, temp_gap.e_aurc(), rep_temp.ece),
                mk("score=de", de_eval.a_full, de_eval.aurc, de_eval.e_aurc, rep_de.ece),
            ];
            Ok(CalibSeedOut {
                rows,
                swap_bound,
                e_msp: msp_eval.e_aurc,
                e_temp: temp_gap.e_aurc(),
                e_de: de_eval.e_aurc,
                ece_msp: rep_msp.ece,
                ece_temp: rep_temp.ece,
                swap_pair_fraction,
                curves_identical,
            })
        })
        .collect();
    let per_seed = per_seed?;

    let mut report = RunReport::default();
    for out in &per_seed {
        report.rows.extend(out.rows.iter().cloned());
    }
    report.write_csv(&out_root(cfg).join("report.csv"))?;

    // Per-seed hard bounds.
    for (out, &seed) in per_seed.iter().zip(&cfg.seeds) {
        let diff = (out.e_temp - out.e_msp).abs();
        if diff > out.swap_bound + 1e-12 {
            return Err(Error::Assertion(format!(
                "seed {seed}: |E-AURC(temp) - E-AURC(msp)| = {diff} exceeds the swap-mass bound {}",
                out.swap_bound
            )));
        }
        if num_classes == 2 && !out.curves_identical {
            return Err(Error::Assertion(format!(
                "seed {seed}: binary tempered MSP must preserve the curve exactly"
            )));
        }
    }

    // Trend assertions over seeds (2 SE tolerance).
    let e_msp: Vec<f64> = per_seed.iter().map(|o| o.e_msp).collect();
    let e_de: Vec<f64> = per_seed.iter().map(|o| o.e_de).collect();
    let ece_msp: Vec<f64> = per_seed.iter().map(|o| o.ece_msp).collect();
    let ece_temp: Vec<f64> = per_seed.iter().map(|o| o.ece_temp).collect();
    let (ece_gain, ece_se) = paired_diff(&ece_msp, &ece_temp)?;
    if ece_gain < -2.0 * ece_se {
        return Err(Error::Assertion(format!(
            "temperature scaling worsened ECE: mean gain {ece_gain} (se {ece_se})"
        )));
    }
    let (de_gain, de_se) = paired_diff(&e_msp, &e_de)?;
    if de_gain < -2.0 * de_se {
        return Err(Error::Assertion(format!(
            "deep ensemble worsened E-AURC: mean gain {de_gain} (se {de_se})"
        )));
    }

    let (m_swap, _) = mean_se(&per_seed.iter().map(|o| o.swap_pair_fraction).collect::<Vec<_>>());
    println!(
        "calibration-study: ece msp->temp {:.4}->{:.4} (gain {ece_gain:.4}), e_aurc msp {:.4} de {:.4} (gain {de_gain:.4}), swapped-pair fraction {m_swap:.4}",
        mean_se(&ece_msp).0,
        mean_se(&ece_temp).0,
        mean_se(&e_msp).0,
        mean_se(&e_de).0,
    );
    Ok(report)
}

/// Fraction of sample pairs (within a deterministic subsample) whose
/// confidence order differs between T = 1 and the fitted temperature,
/// detected with the tail-sum swap scanner.
fn swap_fraction(
    model: &TrainedModel,
    data: &LabeledDataset,
    fitted_t: f64,
    subsample: usize,
) -> Result<f64> {
    if subsample < 2 || (fitted_t - 1.0).abs() < 1e-12 {
        return Ok(0.0);
    }
    let (lo, hi) = if fitted_t > 1.0 { (1.0, fitted_t) } else { (fitted_t, 1.0) };
    let grid: Vec<f64> = (0..=8).map(|i| lo + (hi - lo) * i as f64 / 8.0).collect();
    let logits: Result<Vec<Vec<f64>>> =
        data.features().iter().take(subsample).map(|x| model.logits(x)).collect();
    let logits = logits?;
    let mut swapped = 0usize;
    let mut total = 0usize;
    for i in 0..logits.len() {
        for j in (i + 1)..logits.len() {
            total += 1;
            let scan = find_swap_temperatures(&logits[i], &logits[j], &grid)?;
            if !scan.crossings().is_empty() {
                swapped += 1;
            }
        }
    }
    Ok(swapped as f64 / total as f64)
}

/// Noise sweep over the two-moons jitter levels: per sigma, train the
/// configured model, compute curve and decomposition, and check that the
/// mean E-AURC is nondecreasing in sigma.
pub fn cmd_sweep_noise(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    if cfg.sigmas.is_empty() {
        return Err(Error::Config("sigmas must be nonempty".into()));
    }
    let n_grid = match cfg.task {
        TaskConfig::TwoMoons { n_grid, .. } => n_grid,
        TaskConfig::Gaussian { .. } => {
            return Err(Error::Config("sweep-noise needs a two_moons task".into()))
        }
    };
    let hash = cfg.hash();
    let mut report = RunReport::default();
    let mut means = Vec::new();
    for &sigma in &cfg.sigmas {
        let task = TaskConfig::TwoMoons { noise_sigma: sigma, n_grid };
        // Rejects sigma <= 0 up front: the posterior oracle needs jitter.
        task.moons()?;
        if sigma <= 0.0 {
            return Err(Error::Config("sweep-noise needs positive sigma".into()));
        }
        let setting = format!("sigma={sigma}");
        let rows: Result<Vec<ReportRow>> = cfg
            .seeds
            .par_iter()
            .map(|&seed| {
                let sd = prepare_seed(cfg, &task, seed)?;
                let spec = cfg.models[0].to_spec(2, 2)?;
                let model = train_for_seed(&spec, &cfg.train, &sd.train, seed)?;
                let pair = build_pair(ScoreConfig::Msp, &model, &sd.oracle)?;
                let eval = eval_pair(&pair, &sd.test)?;
                let dec = decompose(&sd.test, &sd.oracle, &pair, &cfg.coverage_grid, cfg.delta)?;
                let dir = seed_dir(cfg, &setting, seed);
                write_pair_outputs(&dir, &eval, &sd)?;
                dec.write_csv(&dir.join("decomposition.csv"))?;
                let s = summarize(&dec);
                let mut row = ReportRow::new(&hash, seed, &setting);
                row.a_full = eval.a_full;
                row.aurc = eval.aurc;
                row.e_aurc = eval.e_aurc;
                row.eps_bayes_mean = Some(s.eps_bayes_mean);
                row.eps_approx_mean = Some(s.eps_approx_mean);
                row.eps_rank_mean = Some(s.eps_rank_mean);
                row.holds_frac = Some(s.holds_frac);
                Ok(row)
            })
            .collect();
        let rows = rows?;
        let (mean, se) = mean_se(&rows.iter().map(|r| r.e_aurc).collect::<Vec<_>>());
        println!("sweep-noise: sigma={sigma} mean_e_aurc={mean:.4} (se {se:.4})");
        means.push((sigma, mean));
        report.rows.extend(rows);
    }
    report.write_csv(&out_root(cfg).join("report.csv"))?;
    for w in means.windows(2) {
        if w[1].1 + 1e-12 < w[0].1 {
            return Err(Error::Assertion(format!(
                "mean E-AURC decreased from sigma={} ({:.4}) to sigma={} ({:.4})",
                w[0].0, w[0].1, w[1].0, w[1].1
            )));
        }
    }
    Ok(report)
}

/// Capacity sweep: the full pipeline per configured model spec, with a
/// printed E-AURC comparison when two or more specs are configured.
pub fn cmd_sweep_capacity(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let hash = cfg.hash();
    let num_classes = cfg.task.num_classes();
    let mut report = RunReport::default();
    let mut summaries = Vec::new();
    for model_cfg in &cfg.models {
        let spec = model_cfg.to_spec(2, num_classes)?;
        let setting = format!("model={}", spec.name());
        let rows: Result<Vec<ReportRow>> = cfg
            .seeds
            .par_iter()
            .map(|&seed| {
                let sd = prepare_seed(cfg, &cfg.task, seed)?;
                let model = train_for_seed(&spec, &cfg.train, &sd.train, seed)?;
                let pair = build_pair(ScoreConfig::Msp, &model, &sd.oracle)?;
                let eval = eval_pair(&pair, &sd.test)?;
                let dec = decompose(&sd.test, &sd.oracle, &pair, &cfg.coverage_grid, cfg.delta)?;
                let dir = seed_dir(cfg, &setting, seed);
                write_pair_outputs(&dir, &eval, &sd)?;
                dec.write_csv(&dir.join("decomposition.csv"))?;
                let s = summarize(&dec);
                let mut row = ReportRow::new(&hash, seed, &setting);
                row.a_full = eval.a_full;
                row.aurc = eval.aurc;
                row.e_aurc = eval.e_aurc;
                row.eps_bayes_mean = Some(s.eps_bayes_mean);
                row.eps_approx_mean = Some(s.eps_approx_mean);
                row.eps_rank_mean = Some(s.eps_rank_mean);
                row.holds_frac = Some(s.holds_frac);
                Ok(row)
            })
            .collect();
        let rows = rows?;
        let (mean, se) = mean_se(&rows.iter().map(|r| r.e_aurc).collect::<Vec<_>>());
        println!("sweep-capacity: model={} mean_e_aurc={mean:.4} (se {se:.4})", spec.name());
        summaries.push((spec.name(), mean, se));
        report.rows.extend(rows);
    }
    report.write_csv(&out_root(cfg).join("report.csv"))?;
    if summaries.len() >= 2 {
        for pair in summaries.windows(2) {
            println!(
                "sweep-capacity: {} vs {}: mean E-AURC {:.4} vs {:.4}",
                pair[0].0, pair[1].0, pair[0].1, pair[1].1
            );
        }
    }
    Ok(report)
}

/// Shift study: evaluate the trained model's curve, E-AURC, and MMD on each
/// shifted test set, and check that no shift significantly improves E-AURC
/// and that every non-identity shift registers in the MMD gauge.
pub fn cmd_shift_study(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    if cfg.shifts.is_empty() {
        return Err(Error::Config("shifts must be nonempty".into()));
    }
    let hash = cfg.hash();
    let num_classes = cfg.task.num_classes();
    struct ShiftSeedOut {
        rows: Vec<ReportRow>,
    }
    let per_seed: Result<Vec<ShiftSeedOut>> = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let sd = prepare_seed(cfg, &cfg.task, seed)?;
            let spec = cfg.models[0].to_spec(2, num_classes)?;
            let model = train_for_seed(&spec, &cfg.train, &sd.train, seed)?;
            let pair = build_pair(ScoreConfig::Msp, &model, &sd.oracle)?;
            let mut rows = Vec::new();
            for name in &cfg.shifts {
                let shift = shift_by_name(name)?;
                let shifted = apply_shift(&sd.test, &shift)?;
                let eval = eval_pair(&pair, &shifted)?;
                let mmd = mmd_rbf(&sd.test, &shifted, Bandwidth::Auto)?;
                let setting = format!("shift={name}");
                let dir = seed_dir(cfg, &setting, seed);
                write_pair_outputs(&dir, &eval, &sd)?;
                let mut row = ReportRow::new(&hash, seed, &setting);
                row.a_full = eval.a_full;
                row.aurc = eval.aurc;
                row.e_aurc = eval.e_aurc;
                row.mmd = Some(mmd);
                rows.push(row);
            }
            Ok(ShiftSeedOut { rows })
        })
        .collect();
    let per_seed = per_seed?;
    let mut report = RunReport::default();
    for out in per_seed {
        report.rows.extend(out.rows);
    }
    report.write_csv(&out_root(cfg).join("report.csv"))?;

    if cfg.shifts.iter().any(|s| s == "identity") {
        let e_id = report.metric("shift=identity", |r| r.e_aurc);
        let mmd_id = report.metric("shift=identity", |r| r.mmd.unwrap_or(f64::NAN));
        for name in cfg.shifts.iter().filter(|s| *s != "identity") {
            let setting = format!("shift={name}");
            let e_shift = report.metric(&setting, |r| r.e_aurc);
            let (gain, se) = paired_diff(&e_shift, &e_id)?;
            println!("shift-study: {name}: mean e_aurc delta {gain:.4} (se {se:.4})");
            if gain < -2.0 * se {
                return Err(Error::Assertion(format!(
                    "shift {name} significantly lowered E-AURC (delta {gain}, se {se})"
                )));
            }
            let mmd_shift = report.metric(&setting, |r| r.mmd.unwrap_or(f64::NAN));
            let (m_shift, _) = mean_se(&mmd_shift);
            let (m_id, _) = mean_se(&mmd_id);
            if m_shift <= m_id {
                return Err(Error::Assertion(format!(
                    "shift {name} did not register in MMD ({m_shift} vs identity {m_id})"
                )));
            }
        }
    }
    Ok(report)
}

/// Train a loss predictor on the validation split (disjoint from the base
/// model's training rows), trace its advantage on the test split, and
/// evaluate the loss-predictor-head score.
pub fn cmd_loss_pred(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let hash = cfg.hash();
    let num_classes = cfg.task.num_classes();
    let results: Result<Vec<ReportRow>> = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let sd = prepare_seed(cfg, &cfg.task, seed)?;
            let spec = cfg.models[0].to_spec(2, num_classes)?;
            let model = train_for_seed(&spec, &cfg.train, &sd.train, seed)?;
            let predictor = Predictor::Single(model.clone());

            let phi_val = loss_features_dataset(cfg.lp_mode, &predictor, &sd.val)?;
            let losses_val = zero_one_losses(&predictor, &sd.val)?;
            let phi_test = loss_features_dataset(cfg.lp_mode, &predictor, &sd.test)?;
            let losses_test = zero_one_losses(&predictor, &sd.test)?;
            let sep_test: Vec<f64> = phi_test.iter().map(|phi| phi[0]).collect();

            let eval_set =
                EvalSet { features: &phi_test, losses: &losses_test, sep: &sep_test };
            let (lp, trace) = train_loss_predictor_traced(
                &phi_val,
                &losses_val,
                cfg.lp_mode,
                &cfg.train.with_seed(seed ^ 0x1005),
                &eval_set,
            )?;

            let setting = format!("lp={}", cfg.lp_mode.name());
            let dir = seed_dir(cfg, &setting, seed);
            crate::losspred::write_advantage_trace_csv(&trace, &dir.join("advantage_trace.csv"))?;
            sd.split.write_csv(&dir.join("split_indices.csv"))?;

            let head_pair = SelectivePair::new(
                Predictor::Single(model),
                ScoreFunction::LossPredictorHead(lp),
            )?;
            let eval = eval_pair(&head_pair, &sd.test)?;
            eval.curve.write_csv(&dir.join("curve.csv"))?;
            eval.gap.write_csv(&dir.join("gap.csv"))?;

            let mut row = ReportRow::new(&hash, seed, &setting);
            row.a_full = eval.a_full;
            row.aurc = eval.aurc;
            row.e_aurc = eval.e_aurc;
            println!(
                "loss-pred: seed={seed} final_adv={:.5} e_aurc(head)={:.4}",
                trace.last().map_or(f64::NAN, |p| p.adv_test),
                eval.e_aurc
            );
            Ok(row)
        })
        .collect();
    let report = RunReport { rows: results? };
    report.write_csv(&out_root(cfg).join("report.csv"))?;
    Ok(report)
}

fn zero_one_losses(predictor: &Predictor, data: &LabeledDataset) -> Result<Vec<f64>> {
    data.features()
        .iter()
        .zip(data.labels())
        .map(|(x, &y)| Ok(if predictor.predict(x)? == y { 0.0 } else { 1.0 }))
        .collect()
}

/// Fit the configured calibrators on the validation split, report ECE
/// before and after, and the curves of the calibrated scores.
pub fn cmd_calibrate(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let hash = cfg.hash();
    let num_classes = cfg.task.num_classes();
    let results: Result<Vec<Vec<ReportRow>>> = cfg
        .seeds
        .par_iter()
        .map(|&seed| {
            let sd = prepare_seed(cfg, &cfg.task, seed)?;
            let spec = cfg.models[0].to_spec(2, num_classes)?;
            let model = train_for_seed(&spec, &cfg.train, &sd.train, seed)?;
            let (conf_val, correct_val) = msp_rows(&model, &sd.val)?;
            let (conf_test, correct_test) = msp_rows(&model, &sd.test)?;

            let mut rows = Vec::new();
            let mut push_variant = |name: &str,
                                    scores_test: Vec<f64>|
             -> Result<()> {
                let scored: Vec<(f64, bool)> =
                    scores_test.iter().zip(&correct_test).map(|(&s, &c)| (s, c)).collect();
                let curve = empirical_curve(&scored)?;
                let gapc = crate::curves::gap_curve(&curve);
                let clamped: Vec<f64> =
                    scores_test.iter().map(|s| s.clamp(0.0, 1.0)).collect();
                let rep = ece(&clamped, &correct_test, cfg.ece_bins)?;
                let setting = format!("cal={name}");
                let dir = seed_dir(cfg, &setting, seed);
                curve.write_csv(&dir.join("curve.csv"))?;
                gapc.write_csv(&dir.join("gap.csv"))?;
                rep.write_csv(&dir.join("reliability.csv"))?;
                sd.split.write_csv(&dir.join("split_indices.csv"))?;
                let mut row = ReportRow::new(&hash, seed, &setting);
                row.a_full = curve.a_full();
                row.aurc = crate::curves::aurc(&curve);
                row.e_aurc = gapc.e_aurc();
                row.ece = Some(rep.ece);
                rows.push(row);
                Ok(())
            };

            push_variant("none", conf_test.clone())?;
            for cal in &cfg.calibrators {
                match cal {
                    crate::harness::config::CalibratorConfig::Temperature => {
                        let val_logits: Result<Vec<Vec<f64>>> =
                            sd.val.features().iter().map(|x| model.logits(x)).collect();
                        let fit = fit_temperature(&val_logits?, sd.val.labels(), None)?;
                        let scores: Result<Vec<f64>> = sd
                            .test
                            .features()
                            .iter()
                            .map(|x| tempered_msp(&model.logits(x)?, fit.t))
                            .collect();
                        push_variant("temperature", scores?)?;
                    }
                    crate::harness::config::CalibratorConfig::Isotonic => {
                        let map = fit_isotonic(&conf_val, &correct_val)?;
                        push_variant(
                            "isotonic",
                            conf_test.iter().map(|&s| map.apply(s)).collect(),
                        )?;
                    }
                    crate::harness::config::CalibratorConfig::Histogram => {
                        let map = fit_histogram(&conf_val, &correct_val, cfg.ece_bins)?;
                        push_variant(
                            "histogram",
                            conf_test.iter().map(|&s| map.apply(s)).collect(),
                        )?;
                    }
                }
            }
            Ok(rows)
        })
        .collect();
    let mut report = RunReport::default();
    for rows in results? {
        report.rows.extend(rows);
    }
    report.write_csv(&out_root(cfg).join("report.csv"))?;
    for setting in report.settings() {
        let e = report.metric(&setting, |r| r.e_aurc);
        let c = report.metric(&setting, |r| r.ece.unwrap_or(f64::NAN));
        println!(
            "calibrate: {setting} mean_e_aurc={:.4} mean_ece={:.4}",
            mean_se(&e).0,
            mean_se(&c).0
        );
    }
    Ok(report)
}

/// Merge run directories: one consolidated report plus a mean gap curve per
/// (run, setting), suitable for external plotting.
pub fn cmd_report(run_dirs: &[PathBuf], out_dir: &Path) -> Result<()> {
    if run_dirs.is_empty() {
        return Err(Error::Config("report needs at least one run directory".into()));
    }
    let mut missing = Vec::new();
    let mut merged = RunReport::default();
    for dir in run_dirs {
        let path = dir.join("report.csv");
        match RunReport::read_csv(&path) {
            Ok(rep) => merged.rows.extend(rep.rows),
            Err(e) => missing.push(format!("{}: {e}", path.display())),
        }
    }
    if !missing.is_empty() {
        return Err(Error::Config(format!("unreadable run reports: {}", missing.join("; "))));
    }
    merged.write_csv(&out_dir.join("consolidated_report.csv"))?;

    // Mean gap curve per (run dir, setting directory).
    for dir in run_dirs {
        for entry in std::fs::read_dir(dir)? {
            let entry = entry?;
            if !entry.file_type()?.is_dir() {
                continue;
            }
            let setting_dir = entry.path();
            let mut curves: Vec<Vec<(f64, f64, f64, f64)>> = Vec::new();
            let mut seed_dirs: Vec<PathBuf> = std::fs::read_dir(&setting_dir)?
                .filter_map(|e| e.ok())
                .map(|e| e.path())
                .filter(|p| p.is_dir())
                .collect();
            seed_dirs.sort();
            for sdir in seed_dirs {
                let gap_path = sdir.join("gap.csv");
                if gap_path.exists() {
                    curves.push(read_gap_csv(&gap_path)?);
                }
            }
            if curves.is_empty() {
                continue;
            }
            let len = curves[0].len();
            if curves.iter().any(|c| c.len() != len) {
                return Err(Error::Malformed {
                    path: setting_dir.display().to_string(),
                    reason: "gap curves disagree in length across seeds".into(),
                });
            }
            let mut out = String::from("coverage,oracle,realized,gap\n");
            let k = curves.len() as f64;
            for i in 0..len {
                let mut acc = (0.0, 0.0, 0.0, 0.0);
                for c in &curves {
                    acc.0 += c[i].0;
                    acc.1 += c[i].1;
                    acc.2 += c[i].2;
                    acc.3 += c[i].3;
                }
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    crate::io_util::fmt_f64(acc.0 / k),
                    crate::io_util::fmt_f64(acc.1 / k),
                    crate::io_util::fmt_f64(acc.2 / k),
                    crate::io_util::fmt_f64(acc.3 / k),
                ));
            }
            let name = format!(
                "gap_curve_{}.csv",
                setting_dir.file_name().unwrap_or_default().to_string_lossy()
            );
            crate::io_util::write_atomic(&out_dir.join(name), &out)?;
        }
    }
    println!(
        "report: merged {} rows from {} run dir(s) into {}",
        merged.rows.len(),
        run_dirs.len(),
        out_dir.display()
    );
    Ok(())
}

fn read_gap_csv(path: &Path) -> Result<Vec<(f64, f64, f64, f64)>> {
    let text = std::fs::read_to_string(path)?;
    let malformed = |reason: String| Error::Malformed { path: path.display().to_string(), reason };
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            if line != "coverage,oracle,realized,gap" {
                return Err(malformed(format!("unexpected header `{line}`")));
            }
            continue;
        }
        if line.starts_with("e_aurc,") || line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            return Err(malformed(format!("bad row `{line}`")));
        }
        let parse = |s: &str| s.parse::<f64>().map_err(|_| malformed(format!("bad float `{s}`")));
        rows.push((parse(f[0])?, parse(f[1])?, parse(f[2])?, parse(f[3])?));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eaurc_bound_zero_for_identical_rankings() {
        let scores = [0.9, 0.4, 0.7, 0.1];
        let same_order = [0.8, 0.3, 0.5, 0.05];
        assert_eq!(eaurc_difference_bound(&scores, &same_order).unwrap(), 0.0);
    }

    #[test]
    fn eaurc_bound_dominates_actual_difference() {
        use rand::Rng;
        use rand_chacha::rand_core::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let n = rng.gen_range(5..80);
            let correct: Vec<bool> = (0..n).map(|_| rng.gen()).collect();
            let a: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
            let b: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
            let curve_a =
                empirical_curve(&a.iter().zip(&correct).map(|(&s, &c)| (s, c)).collect::<Vec<_>>())
                    .unwrap();
            let curve_b =
                empirical_curve(&b.iter().zip(&correct).map(|(&s, &c)| (s, c)).collect::<Vec<_>>())
                    .unwrap();
            let diff = (crate::curves::gap_curve(&curve_a).e_aurc()
                - crate::curves::gap_curve(&curve_b).e_aurc())
            .abs();
            let bound = eaurc_difference_bound(&a, &b).unwrap();
            assert!(diff <= bound + 1e-12, "diff {diff} bound {bound}");
        }
    }
}
