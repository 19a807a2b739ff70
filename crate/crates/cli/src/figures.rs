use std::f64::consts::{FRAC_PI_2, PI};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::json;

use mzsim_core::bayes::{sensitivity_experiment_with, trial_seed};
use mzsim_core::scaling::{common_p_opt, heisenberg_fit_with, scan_p_with, BudgetScan, ScalingConfig};
use mzsim_core::sensitivity::{crlb, error_propagation_sensitivity};
use mzsim_core::states::{sector_amplitudes, InputSpec, TruncationPolicy};
use mzsim_core::structure::{beam_splitter_rotate, noon_scan_with, phase_distribution, relative_number_distribution};

use crate::format::{cell, Csv, Header};
use crate::{BayesOptions, CliError, CliResult, Command, Fig2aArgs, Fig2bArgs, Fig3Args, NoonArgs, TruncationArgs};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Figure {
    Fig2a,
    Fig2b,
    Fig3a,
    Fig3b,
    /// Both fig3 outputs from one set of scans.
    Fig3,
    Fig4,
}

/// Computes and writes the data files of `which`, returning their paths in a fixed order.
pub fn emit_figure_data(which: Figure, command: &Command) -> CliResult<Vec<PathBuf>> {
    match (which, command) {
        (Figure::Fig2a, Command::Fig2a(a)) => fig2a(a).map(|p| vec![p]),
        (Figure::Fig2b, Command::Fig2b(a)) => fig2b(a).map(|p| vec![p]),
        (Figure::Fig3a, Command::Fig3(a)) => fig3(a, true, false),
        (Figure::Fig3b, Command::Fig3(a)) => fig3(a, false, true),
        (Figure::Fig3, Command::Fig3(a)) => fig3(a, true, true),
        (Figure::Fig4, Command::Noon(a)) => fig4(a),
        (which, _) => Err(CliError::Usage(format!("{which:?} is not produced by this subcommand"))),
    }
}

fn write(path: &Path, header: &Header, csv: &Csv) -> CliResult<PathBuf> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let file = std::fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    csv.write(header, std::io::BufWriter::new(file))
        .map_err(|e| CliError::io(path, e))?;
    Ok(path.to_path_buf())
}

fn note<T>(what: &str, result: mzsim_core::Result<T>) -> Option<T> {
    match result {
        Ok(v) => Some(v),
        Err(e) => {
            eprintln!("note: {what}: {e}");
            None
        }
    }
}

struct SweepPoint {
    key: f64,
    ep: Option<f64>,
    crlb: Option<f64>,
    bayes: Option<(f64, f64)>,
}

fn sweep_point(
    key_name: &str,
    key: f64,
    spec: mzsim_core::Result<InputSpec>,
    theta: f64,
    p: usize,
    trials: usize,
    seed: u64,
    options: &BayesOptions,
) -> SweepPoint {
    let label = format!("{key_name}={key}");
    let Some(spec) = note(&label, spec) else {
        return SweepPoint {
            key,
            ep: None,
            crlb: None,
            bayes: None,
        };
    };
    let bayes = if trials == 0 {
        None
    } else {
        note(
            &label,
            sensitivity_experiment_with(
                &spec,
                theta,
                p,
                trials,
                trial_seed(seed, key.to_bits()),
                options.config(),
            ),
        )
        .map(|r| (r.delta_theta, r.dispersion))
    };
    SweepPoint {
        key,
        ep: note(&label, error_propagation_sensitivity(&spec, theta, p as u64)),
        crlb: note(&label, crlb(&spec, p as u64)),
        bayes,
    }
}

fn sweep_csv(columns: &'static [&'static str], points: &[SweepPoint]) -> Csv {
    let mut csv = Csv::new(columns);
    for pt in points {
        csv.push(vec![
            cell(Some(pt.key)),
            cell(pt.ep),
            cell(pt.crlb),
            cell(pt.bayes.map(|b| b.0)),
            cell(pt.bayes.map(|b| b.1)),
        ]);
    }
    csv
}

fn policy(t: &TruncationArgs) -> CliResult<TruncationPolicy> {
    Ok(TruncationPolicy::new(t.tail_tol, t.hard_cap)?)
}

/// Uniform grid on `[0, r_max]` plus the balance point `sinh²r = |α|²` when it falls inside.
pub fn fig2a_r_grid(alpha2: f64, r_max: f64, steps: usize) -> Vec<f64> {
    let mut grid: Vec<f64> = (0..=steps).map(|k| r_max * k as f64 / steps as f64).collect();
    let balance = alpha2.sqrt().asinh();
    if balance <= r_max && !grid.contains(&balance) {
        grid.push(balance);
    }
    grid.sort_by(f64::total_cmp);
    grid
}

fn fig2a(a: &Fig2aArgs) -> CliResult<PathBuf> {
    let policy = policy(&a.truncation)?;
    let header = Header::new("fig2a", a, Some(a.seed), Some(a.truncation.json()));
    let grid = fig2a_r_grid(a.alpha2, a.r_max, a.r_steps);
    let points: Vec<SweepPoint> = grid
        .par_iter()
        .map(|&r| {
            let spec = InputSpec::from_alpha2(a.alpha2, r).map(|s| s.with_truncation(policy));
            sweep_point("r", r, spec, FRAC_PI_2, a.p, a.trials, a.seed, &a.options)
        })
        .collect();
    let csv = sweep_csv(
        &["r", "ep_sensitivity", "crlb", "bayes_mean", "bayes_dispersion"],
        &points,
    );
    write(&a.output, &header, &csv)
}

fn fig2b(a: &Fig2bArgs) -> CliResult<PathBuf> {
    let policy = policy(&a.truncation)?;
    let spec = InputSpec::from_alpha2(a.alpha2, a.r)?.with_truncation(policy);
    let header = Header::new("fig2b", a, Some(a.seed), Some(a.truncation.json()));
    let n = a.theta_steps;
    let points: Vec<SweepPoint> = (1..=n)
        .into_par_iter()
        .map(|k| {
            let theta = PI * k as f64 / (n + 1) as f64;
            sweep_point("theta", theta, Ok(spec), theta, a.p, a.trials, a.seed, &a.options)
        })
        .collect();
    let csv = sweep_csv(
        &["theta", "ep_sensitivity", "crlb", "bayes_mean", "bayes_dispersion"],
        &points,
    );
    write(&a.output, &header, &csv)
}

fn fig3(a: &Fig3Args, want_scans: bool, want_fit: bool) -> CliResult<Vec<PathBuf>> {
    let config = ScalingConfig {
        max_mean_photons: a.max_mean_photons,
        truncation: TruncationPolicy::new(a.tail_tol, a.hard_cap)?,
        theta_true: a.theta,
        experiment: a.options.config(),
    };
    let truncation = json!({"tail_tolerance": a.tail_tol, "hard_cap": a.hard_cap});
    let mut written = Vec::new();

    let need_scans = want_scans || a.p_opt.is_none();
    let scans: Vec<BudgetScan> = if need_scans {
        a.budgets
            .iter()
            .map(|&nt| scan_p_with(nt, &a.p_values, a.trials, a.seed, &config))
            .collect::<mzsim_core::Result<_>>()?
    } else {
        Vec::new()
    };

    if want_scans {
        for scan in &scans {
            let mut rows: Vec<(usize, Option<(f64, f64)>)> = scan
                .points
                .iter()
                .map(|pt| (pt.p, Some((pt.mean_delta_theta, pt.dispersion))))
                .collect();
            for skip in &scan.skipped {
                eprintln!("note: N_T={} p={}: {}", scan.total_budget, skip.p, skip.reason);
                rows.push((skip.p, None));
            }
            rows.sort_by_key(|r| r.0);
            let mut csv = Csv::new(&["p", "mean_delta_theta", "dispersion"]);
            for (p, v) in rows {
                csv.push(vec![p.to_string(), cell(v.map(|x| x.0)), cell(v.map(|x| x.1))]);
            }
            let mut header = Header::new("fig3a", a, Some(a.seed), Some(truncation.clone()));
            header.push(json!({"total_budget": scan.total_budget}));
            let path = a.output_dir.join(format!("fig3a_NT{}.csv", scan.total_budget));
            written.push(write(&path, &header, &csv)?);
        }
    }

    if want_fit {
        let (p_opt, inconclusive) = match a.p_opt {
            Some(p) => (p, false),
            None => {
                let opt = common_p_opt(&scans)?;
                if opt.inconclusive {
                    eprintln!("note: the optimum p={} lies at the edge of the scanned range", opt.p);
                }
                (opt.p, opt.inconclusive)
            }
        };
        let fit = heisenberg_fit_with(&a.budgets, p_opt, a.trials, a.seed, &config)?;
        if fit.fit.poor_fit {
            eprintln!("note: c/N_T fit residual {} is large", fit.fit.residual);
        }
        let mut csv = Csv::new(&[
            "N_T",
            "delta_theta_at_popt",
            "fit_c",
            "crlb_overlay",
            "shot_noise_overlay",
        ]);
        for pt in &fit.points {
            csv.push(vec![
                cell(Some(pt.total_budget)),
                cell(Some(pt.mean_delta_theta)),
                cell(Some(fit.fit.prefactor)),
                cell(Some(pt.crlb_overlay)),
                cell(Some(pt.shot_noise_overlay)),
            ]);
        }
        let mut header = Header::new("fig3b", a, Some(a.seed), Some(truncation));
        header.push(json!({
            "p_opt": p_opt,
            "p_opt_inconclusive": inconclusive,
            "slope": fit.fit.slope,
            "log_residual": fit.fit.residual,
            "poor_fit": fit.fit.poor_fit,
        }));
        written.push(write(&a.output_dir.join("fig3b.csv"), &header, &csv)?);
    }
    Ok(written)
}

fn fig4(a: &NoonArgs) -> CliResult<Vec<PathBuf>> {
    let policy = policy(&a.truncation)?;
    let n = a.total_n.unwrap_or(a.n_bar.round() as usize);
    if n == 0 {
        return Err(CliError::Usage("--total-n: must be at least 1".into()));
    }
    let phi_points = a.phi_points.unwrap_or(16 * (n + 1));
    let spec = InputSpec::optimal_split(a.n_bar, policy)?;
    let input = sector_amplitudes(&spec, n)?;
    let rotated = beam_splitter_rotate(&input);
    let header = |name: &str| Header::new(name, a, None, Some(a.truncation.json()));
    let mut written = Vec::new();

    let mut mu = Csv::new(&["mu", "P_mu_input", "P_mu_afterBS"]);
    let before = relative_number_distribution(&input);
    let after = relative_number_distribution(&rotated);
    for k in 0..=n {
        mu.push(vec![
            cell(Some(input.mu_at(k).value())),
            cell(Some(before[k])),
            cell(Some(after[k])),
        ]);
    }
    written.push(write(&a.output_dir.join("fig4_mu.csv"), &header("fig4_mu"), &mu)?);

    let dist = phase_distribution(&rotated, phi_points)?;
    if dist.under_resolved {
        eprintln!("note: {phi_points} phase points under-resolve the N={n} sector");
    }
    let mut phi = Csv::new(&["phi", "P_phi"]);
    for (x, p) in dist.grid.iter().zip(&dist.density) {
        phi.push(vec![cell(Some(*x)), cell(Some(*p))]);
    }
    written.push(write(&a.output_dir.join("fig4_phi.csv"), &header("fig4_phi"), &phi)?);

    let splits: Vec<f64> = (0..a.split_points)
        .map(|k| k as f64 / (a.split_points - 1) as f64)
        .collect();
    let mut noon = Csv::new(&["split", "P_NOON"]);
    for pt in noon_scan_with(a.n_bar, &splits, n, policy)? {
        if pt.overlap.is_none() {
            eprintln!("note: split={}: sector N={n} carries no weight", pt.split);
        }
        noon.push(vec![cell(Some(pt.split)), cell(pt.overlap.map(|o| o.probability))]);
    }
    written.push(write(&a.output_dir.join("fig4_noon.csv"), &header("fig4_noon"), &noon)?);
    Ok(written)
}
