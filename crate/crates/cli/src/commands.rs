use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;

use num_complex::Complex64;
use ptlevels::hamiltonian::BlockTemplate;
use ptlevels::pade::{build_pade, evaluate, real_poles};
use ptlevels::perturb::{effective_series_with, label_mapping, LevelLabel, SeriesOptions, SeriesRecord};
use ptlevels::sweep::{self, detect_crossings, run_sweep, write_branches_csv, Branch, SampleStatus, SweepConfig};
use ptlevels::{eigen, Model, Parity, TruncationScheme};
use serde_json::{json, Value};

use crate::args::{Cli, Command, ConvergenceArgs, FileFormat, FiguresArgs, Format, PadeArgs, PerturbArgs, Report, SpectrumArgs, SweepArgs};
use crate::output::{base_tolerances, mapping_through, num, Output, RunConfig};
use crate::svg::{self, Curve, Plot};
use crate::Failure;

/// Largest accepted truncation; the dense fallback needs O(dim²) memory.
const MAX_N_MAX: u32 = 200;

/// Highest level with a printed reference table.
const MAPPED_LEVELS: u32 = 5;

pub fn dispatch(cli: Cli) -> Result<(), Failure> {
    let formats = cli.formats.clone().unwrap_or_else(|| vec![FileFormat::Csv, FileFormat::Json, FileFormat::Svg]);
    let config = RunConfig { command: cli.command.clone(), formats };
    match &cli.command {
        Command::Spectrum(a) => spectrum(a, &Output::new(config, cli.out_dir)),
        Command::Perturb(a) => perturb(a, &Output::new(config, cli.out_dir)),
        Command::Pade(a) => pade(a, &Output::new(config, cli.out_dir)),
        Command::Sweep(a) => sweep_cmd(a, &Output::new(config, cli.out_dir)),
        Command::Figures(a) => figures(a, &Output::new(config, Some(cli.out_dir.unwrap_or_else(|| PathBuf::from("."))))),
        Command::Convergence(a) => convergence(a, &Output::new(config, cli.out_dir)),
    }
}

fn emit(text: &str) -> Result<(), Failure> {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())?;
    out.flush()?;
    Ok(())
}

fn check_n(n: u32) -> Result<(), Failure> {
    if n == 0 || n > MAX_N_MAX {
        return Err(Failure::usage(format!("n-max must lie in 1..={MAX_N_MAX}, got {n}")));
    }
    Ok(())
}

fn check_g(name: &str, g: f64) -> Result<(), Failure> {
    if !g.is_finite() {
        return Err(Failure::usage(format!("{name} must be finite, got {g}")));
    }
    Ok(())
}

fn total_states(n: u32) -> usize {
    let t = TruncationScheme::new(n);
    t.sector_size(Parity::Even) + t.sector_size(Parity::Odd)
}

fn label_text(l: Option<LevelLabel>) -> String {
    l.map_or_else(|| "-".to_string(), |l| l.to_string())
}

fn parity_name(p: Parity) -> &'static str {
    match p {
        Parity::Even => "even",
        Parity::Odd => "odd",
    }
}

/// The `levels` eigenvalues of smallest real part over both parity blocks.
fn lowest_rows(model: Model, g: f64, n_max: u32, levels: usize) -> Result<Vec<(Parity, Complex64)>, Failure> {
    let mut rows = Vec::new();
    for parity in Parity::BOTH {
        let t = BlockTemplate::new(model, parity, TruncationScheme::new(n_max));
        let count = levels.min(t.dim());
        if count == 0 {
            continue;
        }
        let (values, _) = eigen::lowest_eigenpairs(&t.at(g)?, count)?;
        rows.extend(values.into_iter().map(|v| (parity, v)));
    }
    rows.sort_by(|x, y| x.1.re.total_cmp(&y.1.re).then(y.1.im.total_cmp(&x.1.im)).then(x.0.cmp(&y.0)));
    rows.truncate(levels);
    Ok(rows)
}

/// Labels by tracking the branches from g = 0 up to |g|.
fn track_labels(a: &SpectrumArgs, rows: &[(Parity, Complex64)]) -> Result<Vec<Option<LevelLabel>>, Failure> {
    let g = a.g.abs();
    let mut top = 0;
    while total_states(top) < a.levels {
        top += 1;
    }
    let cfg = SweepConfig {
        g_max: g.max(sweep::SEED_COUPLING),
        max_level: (top + 2).min(a.n_max),
        ..SweepConfig::new(a.model, TruncationScheme::new(a.n_max))
    };
    let branches = run_sweep(&cfg)?;
    let mut used = vec![false; branches.len()];
    Ok(rows
        .iter()
        .map(|(p, v)| {
            let best = branches
                .iter()
                .enumerate()
                .filter(|(i, b)| !used[*i] && b.parity() == *p)
                .filter_map(|(i, b)| b.value_at(g).map(|w| (i, (w - v).norm())))
                .min_by(|x, y| x.1.total_cmp(&y.1));
            match best {
                Some((i, d)) if d <= 1e-4 * v.norm().max(1.0) => {
                    used[i] = true;
                    Some(branches[i].label)
                }
                _ => None,
            }
        })
        .collect())
}

fn spectrum(a: &SpectrumArgs, out: &Output) -> Result<(), Failure> {
    check_g("g", a.g)?;
    check_n(a.n_max)?;
    if a.levels == 0 || a.levels > total_states(a.n_max) {
        return Err(Failure::usage(format!("levels must lie in 1..={} for n-max {}", total_states(a.n_max), a.n_max)));
    }
    if a.check_convergence && (a.n_max < 11 || total_states(a.n_max - 10) < a.levels) {
        return Err(Failure::usage("--check-convergence compares against n-max - 10, which is too small here"));
    }

    let rows = lowest_rows(a.model, a.g, a.n_max, a.levels)?;
    let labels = if a.labels { track_labels(a, &rows)? } else { vec![None; rows.len()] };
    let change = if a.check_convergence {
        let prev = lowest_rows(a.model, a.g, a.n_max - 10, a.levels)?;
        Some(prev.iter().zip(&rows).map(|(x, y)| (x.1 - y.1).norm()).fold(0.0, f64::max))
    } else {
        None
    };

    let mut csv = format!("{}\n", sweep::CSV_HEADER);
    let mut text = format!("{:<6} {:>6} {:>24} {:>24}\n", "label", "parity", "re_E", "im_E");
    let mut items = Vec::new();
    for ((p, v), l) in rows.iter().zip(&labels) {
        let (ln, lk) = l.map_or((String::new(), String::new()), |l| (l.n.to_string(), l.k.to_string()));
        let _ = writeln!(csv, "{},{p},{ln},{lk},{},{}", num(a.g), num(v.re), num(v.im));
        let _ = writeln!(text, "{:<6} {:>6} {:>24} {:>24}", label_text(*l), p.to_string(), num(v.re), num(v.im));
        items.push(json!({
            "label": l.map(|l| l.to_string()),
            "parity": parity_name(*p),
            "re": v.re,
            "im": if v.im == 0.0 { 0.0 } else { v.im },
        }));
    }
    if let Some(c) = change {
        let _ = writeln!(text, "max change against n-max {}: {}", a.n_max - 10, num(c));
    }
    let doc = json!({
        "config": out.config_value(),
        "levels": items,
        "convergence": change.map(|c| json!({ "compared_with_n_max": a.n_max - 10, "max_change": c })),
    });
    match a.format {
        Format::Text => emit(&text)?,
        Format::Csv => emit(&csv)?,
        Format::Json => emit(&(serde_json::to_string_pretty(&doc)? + "\n"))?,
    }
    out.csv("spectrum.csv", &csv)?;
    out.json("spectrum.json", &doc)?;
    out.metadata(a.model, Some(a.n_max), Value::Null, mapping_through(a.model, MAPPED_LEVELS.min(a.n_max)), base_tolerances())?;

    match change {
        Some(c) if c >= sweep::CONVERGENCE_TOL => Err(Failure::unconverged(format!(
            "truncation n-max {} is not converged: values moved by {c:.3e} against n-max {}",
            a.n_max,
            a.n_max - 10
        ))),
        _ => Ok(()),
    }
}

fn series_options(order: u32, exact_order: Option<u32>) -> SeriesOptions {
    SeriesOptions { max_order: order, exact_order: exact_order.unwrap_or(order).min(order) }
}

fn perturb(a: &PerturbArgs, out: &Output) -> Result<(), Failure> {
    if a.order == 0 || a.order % 2 == 1 {
        return Err(Failure::usage(format!("order must be a positive even number, got {}", a.order)));
    }
    let opts = series_options(a.order, a.exact_order);
    let series = effective_series_with(a.model, a.level, opts)?;
    let mapping = label_mapping(&series);
    let records: Vec<SeriesRecord> = series.iter().map(|s| s.to_record()).collect();

    let mut text = String::new();
    let mut csv = String::from("label_n,label_k,parity,order,exact,value\n");
    for r in &records {
        let label = LevelLabel { n: r.n, k: r.k, parity: r.parity };
        let _ = writeln!(text, "{label} parity {} radicand {} exact through g^{}", r.parity, r.radicand, r.exact_order);
        for c in &r.coefficients {
            let _ = writeln!(text, "  g^{:<3} {}", c.order, c.exact.as_deref().unwrap_or(&c.value));
            let _ = writeln!(csv, "{},{},{},{},{},{}", r.n, r.k, r.parity, c.order, c.exact.as_deref().unwrap_or(""), c.value);
        }
    }
    let doc = json!({ "config": out.config_value(), "series": records, "label_mapping": mapping });
    match a.format {
        Format::Text => emit(&text)?,
        Format::Csv => emit(&csv)?,
        Format::Json => emit(&(serde_json::to_string_pretty(&doc)? + "\n"))?,
    }
    out.csv("series.csv", &csv)?;
    out.json("series.json", &doc)?;
    let orders = json!({ "max_order": opts.max_order, "exact_order": opts.exact_order });
    out.metadata(a.model, None, orders, mapping, base_tolerances())
}

fn pade(a: &PadeArgs, out: &Output) -> Result<(), Failure> {
    if a.l + a.m == 0 || a.l + a.m > 80 {
        return Err(Failure::usage(format!("need 1 <= L + M <= 80, got {}", a.l + a.m)));
    }
    for &g in &a.eval {
        check_g("eval", g)?;
    }
    let order = (a.l + a.m).div_ceil(2) as u32 * 2;
    let opts = series_options(order, a.exact_order);
    let series = effective_series_with(a.model, a.level, opts)?;
    let picked: Vec<_> = series.iter().filter(|s| a.branch.is_none_or(|k| s.label.k == k)).collect();
    if picked.is_empty() {
        return Err(Failure::usage(format!("level {} has no branch {:?}", a.level, a.branch)));
    }
    let g_top = a.eval.iter().fold(0.0f64, |m, g| m.max(g.abs()));

    let mut text = String::new();
    let mut csv = String::from("label_n,label_k,parity,g,value,near_pole\n");
    let mut items = Vec::new();
    for s in picked {
        let p = build_pade(s, a.l, a.m)?;
        let mut evals = Vec::new();
        for &g in &a.eval {
            let v = evaluate(&p, g);
            let _ = writeln!(text, "{} {} g={} value={} near_pole={}", s.label, s.label.parity, num(g), num(v.value), v.near_pole);
            let _ = writeln!(csv, "{},{},{},{},{},{}", s.label.n, s.label.k, s.label.parity, num(g), num(v.value), v.near_pole);
            evals.push(json!({ "g": g, "value": v.value, "near_pole": v.near_pole }));
        }
        let poles = if g_top > 0.0 { real_poles(&p, 0.0, g_top) } else { Vec::new() };
        items.push(json!({
            "label": s.label.to_string(),
            "n": s.label.n,
            "k": s.label.k,
            "parity": s.label.parity,
            "L": p.l,
            "M": p.m,
            "exact": p.exact,
            "numerator": p.num.iter().map(|c| c.to_decimal_string(40)).collect::<Vec<_>>(),
            "denominator": p.den.iter().map(|c| c.to_decimal_string(40)).collect::<Vec<_>>(),
            "evaluations": evals,
            "real_poles_up_to_max_eval": poles,
        }));
    }
    let doc = json!({ "config": out.config_value(), "pade_variable": "g", "approximants": items });
    match a.format {
        Format::Text => emit(&text)?,
        Format::Csv => emit(&csv)?,
        Format::Json => emit(&(serde_json::to_string_pretty(&doc)? + "\n"))?,
    }
    out.csv("pade.csv", &csv)?;
    out.json("pade.json", &doc)?;
    let orders = json!({ "L": a.l, "M": a.m, "series_order": opts.max_order, "exact_order": opts.exact_order });
    out.metadata(a.model, None, orders, label_mapping(&series), base_tolerances())
}

fn sweep_tolerances(cfg: &SweepConfig) -> Value {
    let mut t = base_tolerances();
    t["overlap_threshold"] = json!(cfg.overlap_threshold);
    t["imag_tol"] = json!(cfg.imag_tol);
    t["max_refinements"] = json!(sweep::MAX_REFINEMENTS);
    t["seed_coupling"] = json!(sweep::SEED_COUPLING);
    t
}

fn branches_csv(branches: &[Branch]) -> Result<String, Failure> {
    let mut buf = Vec::new();
    write_branches_csv(branches, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv is ascii"))
}

fn broken_samples(branches: &[Branch]) -> Vec<(LevelLabel, f64)> {
    branches
        .iter()
        .flat_map(|b| b.samples.iter().filter(|s| s.status == SampleStatus::Broken).map(move |s| (b.label, s.g)))
        .collect()
}

#[derive(Clone, Copy)]
enum Part {
    Re,
    Im,
}

fn branch_plot(branches: &[Branch], part: Part, cfg: &SweepConfig, title: &str, config: &str) -> String {
    let mark = 5.0 * cfg.initial_step;
    let on_mark = |g: f64| ((g / mark) - (g / mark).round()).abs() < 1e-6;
    let pick = |v: Complex64| match part {
        Part::Re => v.re,
        Part::Im => v.im,
    };
    let curves: Vec<Curve> = branches
        .iter()
        .map(|b| {
            let ok: Vec<_> = b.samples.iter().filter(|s| s.status != SampleStatus::Broken).collect();
            Curve {
                parity: b.parity(),
                points: ok.iter().map(|s| (s.g, pick(s.value))).collect(),
                marks: ok.iter().filter(|s| on_mark(s.g)).map(|s| (s.g, pick(s.value))).collect(),
            }
        })
        .collect();
    let y_label = match part {
        Part::Re => "Re E",
        Part::Im => "Im E",
    };
    svg::render(&Plot { title, x_label: "g", y_label, x_range: (cfg.g_min, cfg.g_max), config }, &curves)
}

fn model_title(model: Model) -> &'static str {
    match model {
        Model::Cubic12 => "W = x y^2",
        Model::HenonHeiles => "W = x y^2 - x^3/3",
    }
}

fn sweep_cmd(a: &SweepArgs, out: &Output) -> Result<(), Failure> {
    check_n(a.n_max)?;
    let cfg = SweepConfig {
        model: a.model,
        g_min: a.g_min,
        g_max: a.g_max,
        initial_step: a.step,
        trunc: TruncationScheme::new(a.n_max),
        overlap_threshold: a.overlap,
        imag_tol: a.imag_tol,
        max_level: a.levels,
        keep_vectors: false,
    };
    cfg.validate()?;
    let branches = run_sweep(&cfg)?;
    let events = detect_crossings(&branches, &cfg)?;
    let broken = broken_samples(&branches);
    if let Some((l, g)) = broken.first() {
        eprintln!("warning: {} samples could not be matched (first: {l} at g = {g})", broken.len());
    }

    let csv = branches_csv(&branches)?;
    let doc = json!({ "config": out.config_value(), "sweep": cfg, "events": events });
    match a.report {
        Report::Crossings => emit(&(serde_json::to_string_pretty(&doc)? + "\n"))?,
        Report::Branches => emit(&csv)?,
    }
    out.csv("branches.csv", &csv)?;
    out.json("crossings.json", &doc)?;
    let config = out.config_json();
    let title = model_title(a.model);
    out.svg("branches_re.svg", &branch_plot(&branches, Part::Re, &cfg, &format!("Re E, {title}"), &config))?;
    out.svg("branches_im.svg", &branch_plot(&branches, Part::Im, &cfg, &format!("Im E, {title}"), &config))?;
    out.metadata(a.model, Some(a.n_max), Value::Null, mapping_through(a.model, MAPPED_LEVELS.min(a.levels)), sweep_tolerances(&cfg))
}

fn figures(a: &FiguresArgs, out: &Output) -> Result<(), Failure> {
    let (model, part) = match a.figure {
        1 => (Model::Cubic12, Part::Re),
        2 => (Model::Cubic12, Part::Im),
        3 => (Model::HenonHeiles, Part::Re),
        4 => (Model::HenonHeiles, Part::Im),
        f => return Err(Failure::usage(format!("figure must be 1, 2, 3 or 4, got {f}"))),
    };
    check_n(a.n_max)?;
    let g_max = a.g_max.unwrap_or(match model {
        Model::Cubic12 => 6.0,
        Model::HenonHeiles => 3.0,
    });
    let cfg = SweepConfig { g_max, initial_step: a.step, max_level: a.levels, ..SweepConfig::new(model, TruncationScheme::new(a.n_max)) };
    cfg.validate()?;
    let branches = run_sweep(&cfg)?;
    let broken = broken_samples(&branches);
    if let Some((l, g)) = broken.first() {
        return Err(Failure::tracking(format!("{} samples could not be matched (first: {l} at g = {g})", broken.len())));
    }

    let stem = format!("figure{}", a.figure);
    let part_name = match part {
        Part::Re => "Re E",
        Part::Im => "Im E",
    };
    out.csv(&format!("{stem}.csv"), &branches_csv(&branches)?)?;
    out.svg(&format!("{stem}.svg"), &branch_plot(&branches, part, &cfg, &format!("{part_name}, {}", model_title(model)), &out.config_json()))?;
    out.metadata(model, Some(a.n_max), Value::Null, mapping_through(model, MAPPED_LEVELS.min(a.levels)), sweep_tolerances(&cfg))?;
    emit(&format!("{stem}: {} branches, {} samples\n", branches.len(), branches.iter().map(|b| b.samples.len()).sum::<usize>()))
}

fn convergence(a: &ConvergenceArgs, out: &Output) -> Result<(), Failure> {
    check_g("g", a.g)?;
    if a.truncations.is_empty() {
        return Err(Failure::usage("no truncations given"));
    }
    for &n in &a.truncations {
        check_n(n)?;
    }
    let smallest = *a.truncations.iter().min().expect("nonempty");
    if a.levels == 0 || a.levels > total_states(smallest) {
        return Err(Failure::usage(format!("levels must lie in 1..={} for n-max {smallest}", total_states(smallest))));
    }
    let table = sweep::convergence_study(a.model, a.g, a.levels, &a.truncations)?;

    let mut text = String::new();
    let mut csv = String::from("n_max,index,re_E,im_E\n");
    for r in &table.rows {
        let change = r.max_change.map_or_else(|| "-".to_string(), num);
        let _ = writeln!(text, "n_max {:<4} max_change {change}", r.n_max);
        for (i, v) in r.values.iter().enumerate() {
            let _ = writeln!(text, "  {i:>3} {:>24} {:>24}", num(v.re), num(v.im));
            let _ = writeln!(csv, "{},{i},{},{}", r.n_max, num(v.re), num(v.im));
        }
    }
    let _ = writeln!(text, "converged at: {}", table.converged_at.map_or_else(|| "none".to_string(), |n| n.to_string()));
    let doc = json!({ "config": out.config_value(), "table": table });
    match a.format {
        Format::Text => emit(&text)?,
        Format::Csv => emit(&csv)?,
        Format::Json => emit(&(serde_json::to_string_pretty(&doc)? + "\n"))?,
    }
    out.csv("convergence.csv", &csv)?;
    out.json("convergence.json", &doc)?;
    let top = *a.truncations.iter().max().expect("nonempty");
    out.metadata(a.model, Some(top), Value::Null, mapping_through(a.model, MAPPED_LEVELS.min(smallest)), base_tolerances())?;
    if a.require && table.converged_at.is_none() {
        return Err(Failure::unconverged(format!("no two successive truncations agree to {:e}", sweep::CONVERGENCE_TOL)));
    }
    Ok(())
}
