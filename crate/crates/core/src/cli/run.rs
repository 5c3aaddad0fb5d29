//! One runner per subcommand. Each writes its files under the output directory and
//! reports whether every hard check passed.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::config::*;
use crate::decomp::{
    atom_row_col_bound, layer_cake, random_layer_cake_input, reconstruct, schur_split,
    simultaneous_split_rc, RectAtom, SplitCertificate,
};
use crate::kfun::{build_curve, fmt17, kt_solve, theta_q_norm, KPair, ProjectionTable};
use crate::khintchine::{divergence_study, ratio_study, semicircle_ks, StudySettings};
use crate::matcore::derive_seed;
use crate::seqnorms::DEFAULT_REL_GAP;

pub struct Outcome {
    pub files: Vec<PathBuf>,
    /// Human-readable descriptions of failed hard checks.
    pub failures: Vec<String>,
}

/// Errors raised while computing (as opposed to while reading the configuration).
pub struct RunError(pub String);

impl<E: std::fmt::Display> From<E> for RunError {
    fn from(e: E) -> Self {
        RunError(e.to_string())
    }
}

type RunResult<T> = std::result::Result<T, RunError>;

fn opt(x: Option<f64>) -> String {
    x.map(fmt17).unwrap_or_default()
}

fn seed_str(s: Option<u64>) -> String {
    s.map(|s| s.to_string()).unwrap_or_default()
}

fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> RunResult<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> RunResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn sandwich(c: &SandwichConfig, instances: &[Instance], out: &Path) -> RunResult<Outcome> {
    let ts = c.t_grid.points();
    let per: Vec<Vec<Vec<String>>> = instances
        .par_iter()
        .map(|inst| -> RunResult<Vec<Vec<String>>> {
            let table = ProjectionTable::build(&inst.x, &c.search)?;
            let (n, _) = inst.x.shape();
            let mut warm = None;
            let mut rows = Vec::new();
            for &t in &ts {
                let (split, w) = kt_solve(&inst.x, t, KPair::Rc, c.budget, DEFAULT_REL_GAP, warm.as_ref())?;
                warm = Some(w);
                let k = table.k_t(t).0;
                let lower_ok = k <= split.cost + 1e-6;
                let two_ok = split.cost <= 2.0 * k * (1.0 + c.factor_two_slack);
                rows.push(vec![
                    inst.id.to_string(),
                    seed_str(inst.seed),
                    n.to_string(),
                    inst.x.len().to_string(),
                    fmt17(t),
                    fmt17(k),
                    fmt17(split.cost),
                    fmt17(split.gap),
                    fmt17(split.cost / k),
                    opt(table.k_t_nested(t)),
                    lower_ok.to_string(),
                    two_ok.to_string(),
                ]);
            }
            Ok(rows)
        })
        .collect::<RunResult<_>>()?;
    let rows: Vec<Vec<String>> = per.into_iter().flatten().collect();
    let mut failures = Vec::new();
    for r in &rows {
        if r[10] != "true" {
            failures.push(format!("instance {} t={}: k_lower exceeds K_upper", r[0], r[4]));
        }
        if c.require_factor_two && r[11] != "true" {
            failures.push(format!("instance {} t={}: K_upper > 2·k_lower", r[0], r[4]));
        }
    }
    let path = out.join("sandwich.csv");
    write_csv(
        &path,
        &["id", "seed", "n", "len", "t", "k_lower", "k_upper", "gap", "ratio", "nested", "lower_ok", "factor_two_ok"],
        &rows,
    )?;
    Ok(Outcome {
        files: vec![path],
        failures,
    })
}

pub fn khintchine(c: &KhintchineConfig, seed: u64, out: &Path) -> RunResult<Outcome> {
    let settings = StudySettings {
        left: c.left,
        right: c.right,
        family: c.family,
        seed,
        count: c.count,
        n_max: c.n_max,
        len_max: c.len_max,
        exponents: c.exponents.clone(),
        big_n: c.big_n,
        budget: c.budget,
        sign_mode: c.sign_mode,
    };
    let report = ratio_study(&settings)?;
    let csv_path = out.join("khintchine.csv");
    report.write_csv(std::fs::File::create(&csv_path)?)?;
    let json_path = out.join("khintchine_summary.json");
    #[derive(Serialize)]
    struct Summary<'a> {
        settings: &'a StudySettings,
        summary: &'a [crate::khintchine::RatioSummary],
    }
    write_json(
        &json_path,
        &Summary {
            settings: &report.settings,
            summary: &report.summary,
        },
    )?;
    let failures = report
        .rows
        .iter()
        .filter(|r| !(r.ratio.is_finite() && r.ratio > 0.0))
        .map(|r| format!("instance {}: ratio {} is not finite and positive", r.id, r.ratio))
        .collect();
    Ok(Outcome {
        files: vec![csv_path, json_path],
        failures,
    })
}

#[derive(Serialize)]
struct CertificateRecord {
    id: usize,
    seed: Option<u64>,
    certificate: SplitCertificate,
}

pub fn decompose(c: &DecomposeConfig, instances: &[Instance], out: &Path) -> RunResult<Outcome> {
    let certs: Vec<SplitCertificate> = instances
        .par_iter()
        .map(|inst| -> RunResult<SplitCertificate> {
            Ok(match c.method {
                SplitMethod::Rc => simultaneous_split_rc(&inst.x, c.budget)?,
                SplitMethod::Schur => schur_split(&inst.x, c.p0, c.epsilon, c.budget)?,
            })
        })
        .collect::<RunResult<_>>()?;
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (inst, cert) in instances.iter().zip(&certs) {
        let rec = cert.reconstruction_error(&inst.x);
        let worst_hs = cert
            .bounds
            .iter()
            .filter(|b| b.id.starts_with("hs_"))
            .map(|b| b.ratio())
            .fold(0.0, f64::max);
        let ratio = |id: &str| cert.bound(id).map(|b| b.ratio());
        if rec > 1e-10 {
            failures.push(format!("instance {}: reconstruction error {rec:.3e}", inst.id));
        }
        for b in cert.bounds.iter().filter(|b| !b.holds()) {
            failures.push(format!(
                "instance {}: {} measured {} exceeds claimed {}",
                inst.id, b.id, b.measured, b.claimed
            ));
        }
        let (n, m) = inst.x.shape();
        rows.push(vec![
            inst.id.to_string(),
            seed_str(inst.seed),
            format!("{n}x{m}"),
            inst.x.len().to_string(),
            fmt17(cert.p0),
            fmt17(cert.epsilon),
            fmt17(rec),
            fmt17(worst_hs),
            opt(ratio("row_p0")),
            opt(ratio("col_p0")),
            opt(cert.observation("rc_constant")),
            cert.all_hold().to_string(),
        ]);
    }
    let csv_path = out.join("decompose.csv");
    write_csv(
        &csv_path,
        &["id", "seed", "shape", "len", "p0", "epsilon", "reconstruction", "worst_hs_ratio", "row_ratio", "col_ratio", "rc_constant", "all_hold"],
        &rows,
    )?;
    let json_path = out.join("certificates.json");
    let records: Vec<CertificateRecord> = instances
        .iter()
        .zip(certs)
        .map(|(i, certificate)| CertificateRecord {
            id: i.id,
            seed: i.seed,
            certificate,
        })
        .collect();
    write_json(&json_path, &records)?;
    Ok(Outcome {
        files: vec![csv_path, json_path],
        failures,
    })
}

#[derive(Serialize)]
struct LayerCakeRecord {
    id: usize,
    t: f64,
    g: Vec<f64>,
    f: Vec<f64>,
    atoms: Vec<RectAtom>,
}

pub fn layercake(c: &LayerCakeConfig, seed: Option<u64>, out: &Path) -> RunResult<Outcome> {
    let triples: Vec<Triple> = if c.triples.is_empty() {
        let seed = seed.expect("checked by the caller");
        (0..c.count)
            .map(|k| {
                let (g, f, t) = random_layer_cake_input(seed, k as u64, c.size_max);
                Triple { g, f, t }
            })
            .collect()
    } else {
        c.triples.clone()
    };
    let mut rows = Vec::new();
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (id, tr) in triples.iter().enumerate() {
        let atoms = layer_cake(&tr.g, &tr.f, tr.t)?;
        let rec = reconstruct(&atoms, tr.g.len(), tr.f.len());
        let scale = tr.g.iter().chain(&tr.f).copied().fold(0.0, f64::max);
        let mut err: f64 = 0.0;
        for (i, gi) in tr.g.iter().enumerate() {
            for (j, fj) in tr.f.iter().enumerate() {
                err = err.max((rec[i][j] - gi.min(*fj)).abs());
            }
        }
        let rel = if scale > 0.0 { err / scale } else { err };
        let total: f64 = atoms.iter().map(|a| a.weight).sum();
        let defect = atoms
            .iter()
            .map(|a| (atom_row_col_bound(a) - 1.0).abs())
            .fold(0.0, f64::max);
        if rel > 1e-12 {
            failures.push(format!("triple {id}: reconstruction error {rel:.3e}"));
        }
        if total > 2.0 * (1.0 + 1e-12) {
            failures.push(format!("triple {id}: total weight {total} exceeds 2"));
        }
        if defect > 1e-12 {
            failures.push(format!("triple {id}: atom bound off by {defect:.3e}"));
        }
        rows.push(vec![
            id.to_string(),
            tr.g.len().to_string(),
            tr.f.len().to_string(),
            fmt17(tr.t),
            atoms.len().to_string(),
            fmt17(total),
            fmt17(rel),
            fmt17(defect),
        ]);
        records.push(LayerCakeRecord {
            id,
            t: tr.t,
            g: tr.g.clone(),
            f: tr.f.clone(),
            atoms,
        });
    }
    let csv_path = out.join("layercake.csv");
    write_csv(
        &csv_path,
        &["id", "rows", "cols", "t", "atoms", "total_weight", "reconstruction", "atom_defect"],
        &rows,
    )?;
    let json_path = out.join("layercake.json");
    write_json(&json_path, &records)?;
    Ok(Outcome {
        files: vec![csv_path, json_path],
        failures,
    })
}

pub fn freeprob(c: &FreeProbConfig, seed: u64, out: &Path) -> RunResult<Outcome> {
    let mut failures = Vec::new();
    let jobs: Vec<(usize, u64)> = c
        .ks_dims
        .iter()
        .flat_map(|&d| (0..c.ks_seeds).map(move |s| (d, s as u64)))
        .collect();
    let ks: Vec<f64> = jobs
        .par_iter()
        .map(|&(d, s)| semicircle_ks(derive_seed(seed, s), d))
        .collect::<Result<_, _>>()?;
    let mut ks_rows = Vec::new();
    for (&(d, s), &v) in jobs.iter().zip(&ks) {
        if v > c.ks_tol {
            failures.push(format!("KS distance {v:.4} at dimension {d} exceeds {}", c.ks_tol));
        }
        ks_rows.push(vec![
            derive_seed(seed, s).to_string(),
            d.to_string(),
            fmt17(v),
            (v <= c.ks_tol).to_string(),
        ]);
    }
    let ks_path = out.join("freeprob_ks.csv");
    write_csv(&ks_path, &["seed", "dim", "ks", "ok"], &ks_rows)?;

    let div_seed = derive_seed(seed, u64::MAX);
    let div = divergence_study(&c.divergence_terms, c.divergence_dim, div_seed)?;
    for w in div.windows(2) {
        if !(w[1].ratio > w[0].ratio) {
            failures.push(format!(
                "p = ∞ ratio not increasing from N = {} to N = {}",
                w[0].terms, w[1].terms
            ));
        }
    }
    let div_rows: Vec<Vec<String>> = div
        .iter()
        .map(|r| {
            vec![
                div_seed.to_string(),
                c.divergence_dim.to_string(),
                r.terms.to_string(),
                fmt17(r.rademacher),
                fmt17(r.free),
                fmt17(r.ratio),
            ]
        })
        .collect();
    let div_path = out.join("freeprob_divergence.csv");
    write_csv(&div_path, &["seed", "dim", "terms", "rademacher", "free", "ratio"], &div_rows)?;
    Ok(Outcome {
        files: vec![ks_path, div_path],
        failures,
    })
}

pub fn ktcurve(c: &KtCurveConfig, instances: &[Instance], out: &Path) -> RunResult<Outcome> {
    let ts = c.t_grid.points();
    let curves = instances
        .par_iter()
        .map(|inst| -> RunResult<_> {
            let table = match c.pair {
                KPair::Rc => Some(ProjectionTable::build(&inst.x, &c.search)?),
                KPair::A0a1 => None,
            };
            Ok(build_curve(&inst.x, c.pair, &ts, c.budget, DEFAULT_REL_GAP, table.as_ref())?)
        })
        .collect::<RunResult<Vec<_>>>()?;
    let mut rows = Vec::new();
    let mut norm_rows = Vec::new();
    for (inst, curve) in instances.iter().zip(&curves) {
        for s in curve.samples() {
            rows.push(vec![
                inst.id.to_string(),
                seed_str(inst.seed),
                fmt17(s.t),
                fmt17(s.lower),
                fmt17(s.upper),
            ]);
        }
        for e in &c.norms {
            let (lo, up, status) = match theta_q_norm(curve, e) {
                Ok((lo, up)) => (fmt17(lo), fmt17(up), "ok".to_string()),
                Err(err) => (String::new(), String::new(), err.to_string()),
            };
            norm_rows.push(vec![
                inst.id.to_string(),
                fmt17(e.theta),
                fmt17(e.q),
                lo,
                up,
                status,
            ]);
        }
    }
    let path = out.join("ktcurve.csv");
    write_csv(&path, &["id", "seed", "t", "lower", "upper"], &rows)?;
    let mut files = vec![path];
    if !c.norms.is_empty() {
        let p = out.join("ktcurve_norms.csv");
        write_csv(&p, &["id", "theta", "q", "lower", "upper", "status"], &norm_rows)?;
        files.push(p);
    }
    Ok(Outcome {
        files,
        failures: Vec::new(),
    })
}

/// sup over `ts` of (t^{−θ} k_t)².
pub fn grid_weak_type(table: &ProjectionTable, theta: f64, ts: &[f64]) -> f64 {
    ts.iter()
        .map(|&t| (t.powf(-theta) * table.k_t(t).0).powi(2))
        .fold(0.0, f64::max)
}

/// The user grid together with every crossover t = (τ(Q)/τ(P))^{1/2} of the table.
pub fn grid_with_crossovers(table: &ProjectionTable, base: &[f64]) -> Vec<f64> {
    let mut ts: Vec<f64> = base.to_vec();
    ts.extend(
        table
            .rank_pairs()
            .into_iter()
            .map(|(rp, rq)| (rq as f64 / rp as f64).sqrt()),
    );
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    ts
}

pub fn weaktype(c: &WeakTypeConfig, instances: &[Instance], out: &Path) -> RunResult<Outcome> {
    let base = c.t_grid.points();
    let per = instances
        .par_iter()
        .map(|inst| -> RunResult<Vec<(f64, f64, f64)>> {
            let table = ProjectionTable::build(&inst.x, &c.search)?;
            let ts = grid_with_crossovers(&table, &base);
            Ok(c
                .thetas
                .iter()
                .map(|&th| (th, table.weak_type(th).0, grid_weak_type(&table, th, &ts)))
                .collect())
        })
        .collect::<RunResult<Vec<_>>>()?;
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (inst, vals) in instances.iter().zip(per) {
        for (th, wt, sup) in vals {
            let rel = if wt > 0.0 { (wt - sup).abs() / wt } else { (wt - sup).abs() };
            if rel > 1e-6 {
                failures.push(format!("instance {} θ={th}: relative difference {rel:.3e}", inst.id));
            }
            rows.push(vec![
                inst.id.to_string(),
                seed_str(inst.seed),
                fmt17(th),
                fmt17(wt),
                fmt17(sup),
                fmt17(rel),
            ]);
        }
    }
    let path = out.join("weaktype.csv");
    write_csv(&path, &["id", "seed", "theta", "weak_type", "grid_sup", "rel_diff"], &rows)?;
    Ok(Outcome {
        files: vec![path],
        failures,
    })
}
