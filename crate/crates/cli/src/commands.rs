use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde_json::{json, Value};

use mg1_core::asymptotics::{
    convergence_study, fit_constants, last_level_ratio, tail_ratio, TailModel,
};
use mg1_core::chain::TailWeights;
use mg1_core::deviation::{
    deviation_d_window, difference_formula_check, poisson_residual, DeviationWindow,
};
use mg1_core::mapg1::{embed_chain, loss_asymptotic, loss_exact, EmbedOptions, MapSpec};
use mg1_core::matan::MatanSolution;
use mg1_core::oracle::{first_passage_solve, gth, h_definitional, mc_queue};
use mg1_core::passage::PassageVectors;
use mg1_core::stationary::{solve_finite, solve_infinite, InfiniteSolution, StationaryOptions};
use mg1_core::{presets, ChainSpec, Error, FiniteChainSpec, LevelVector, RFamily};

use crate::parse::{self, usage, TailArg};
use crate::{exit, Command, Mode, OutDir};

pub fn run(cmd: Command) -> Result<u8> {
    match cmd {
        Command::Validate { config } => validate(&config),
        Command::Solve {
            config,
            mode,
            n,
            out,
        } => solve(&config, mode, n, &out),
        Command::Deviation {
            config,
            k,
            l,
            check_poisson,
            check_diff,
            n,
            out,
        } => deviation(&config, k, l, check_poisson, check_diff, n, &out),
        Command::Study {
            config,
            grid,
            k_list,
            tail_model,
            out,
        } => study(&config, &grid, &k_list, &tail_model, &out),
        Command::Loss {
            map,
            svc,
            n_grid,
            asymptotic,
            simulate,
            arrivals,
            replications,
            k_max,
            out,
        } => loss(
            &map,
            &svc,
            &n_grid,
            asymptotic,
            simulate.map(|seed| (seed, arrivals, replications)),
            k_max,
            &out,
        ),
        Command::Verify { config, n, levels } => verify(&config, n, levels),
        Command::Preset { name } => preset(&name),
    }
}

fn load_chain(path: &Path) -> Result<ChainSpec> {
    let text = parse::read(path)?;
    let spec = ChainSpec::from_json(&text).with_context(|| format!("in {}", path.display()))?;
    Ok(spec)
}

fn recurrent_chain(path: &Path) -> Result<ChainSpec> {
    let spec = load_chain(path)?;
    spec.validate_recurrent()
        .with_context(|| format!("in {}", path.display()))?;
    Ok(spec)
}

fn infinite(spec: &ChainSpec) -> Result<(MatanSolution, InfiniteSolution)> {
    let sol = MatanSolution::solve(spec)?;
    let pi = solve_infinite(spec, &sol, &StationaryOptions::for_spec(spec))?;
    Ok((sol, pi))
}

fn write_out(out: &OutDir, files: &[(&str, String)]) -> Result<()> {
    fs::create_dir_all(&out.out).with_context(|| format!("cannot create {}", out.out.display()))?;
    for (name, body) in files {
        let path = out.out.join(name);
        fs::write(&path, body).with_context(|| format!("cannot write {}", path.display()))?;
    }
    Ok(())
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    s
}

fn validate(config: &Path) -> Result<u8> {
    let spec = load_chain(config)?;
    let report = spec.validate()?;
    print!("{}", pretty(&serde_json::to_value(&report)?));
    Ok(exit::OK)
}

fn solve(config: &Path, mode: Mode, n: Option<usize>, out: &OutDir) -> Result<u8> {
    let spec = recurrent_chain(config)?;
    let (pi, summary) = match mode {
        Mode::Infinite => {
            let (_, s) = infinite(&spec)?;
            let summary = json!({
                "mode": "infinite",
                "levels": s.levels,
                "total": s.pi.total(),
                "normalization_gap": s.normalization_gap,
                "tail_bound": s.pi.tail_mass(s.pi.max_level()),
            });
            (s.pi, summary)
        }
        Mode::Finite => {
            let Some(n) = n else {
                return usage("--mode finite needs --N");
            };
            if n == 0 {
                return usage("--N must be at least 1");
            }
            let pi = solve_finite(&FiniteChainSpec::last_column(&spec, n)?)?;
            let summary = json!({ "mode": "finite", "N": n, "total": pi.total() });
            (pi, summary)
        }
    };
    write_out(
        out,
        &[("pi.csv", pi.to_csv()), ("summary.json", pretty(&summary))],
    )?;
    println!(
        "wrote {} levels to {}",
        pi.max_level() + 1,
        out.out.display()
    );
    Ok(exit::OK)
}

fn deviation(
    config: &Path,
    k: usize,
    l: usize,
    check_poisson: bool,
    check_diff: bool,
    n: Option<usize>,
    out: &OutDir,
) -> Result<u8> {
    if check_diff && n.is_none() {
        return usage("--check-diff needs --N");
    }
    let spec = recurrent_chain(config)?;
    let (sol, pi) = infinite(&spec)?;
    let win = DeviationWindow::build(&spec, &sol, &pi, k, l)?;
    let mut summary = json!({ "window": serde_json::to_value(win.summary())? });
    if check_poisson {
        let r = poisson_residual(&spec, &win)?;
        println!("poisson residual: {:.3e}", r.max_residual);
        summary["poisson"] = serde_json::to_value(&r)?;
    }
    if let Some(n) = n.filter(|_| check_diff) {
        let f = FiniteChainSpec::last_column(&spec, n)?;
        let pn = solve_finite(&f)?;
        let rep = difference_formula_check(&spec, &win, &f, &pn)?;
        println!("difference formula N={n}: max error {:.3e}", rep.max_error);
        summary["difference"] = serde_json::to_value(&rep)?;
    }
    println!("decomposition gap: {:.3e}", win.decomposition_gap);
    write_out(
        out,
        &[
            ("deviation.csv", win.to_csv()),
            ("summary.json", pretty(&summary)),
        ],
    )?;
    Ok(exit::OK)
}

fn study(config: &Path, grid: &str, k_list: &str, tail: &str, out: &OutDir) -> Result<u8> {
    let grid = parse::levels(grid, "--grid")?;
    let k_list = parse::levels(k_list, "--k-list")?;
    let tail = parse::tail(tail)?;
    let spec = recurrent_chain(config)?;
    let tail = match tail {
        TailArg::Model(t) => t,
        TailArg::Chain => match TailModel::chain_integrated(&spec) {
            Ok(t) => t,
            Err(Error::Inapplicable(why)) => {
                let summary = json!({
                    "assumptions_ok": false,
                    "context": format!("assumption-violated: {why}"),
                    "pass": false,
                });
                write_out(
                    out,
                    &[
                        ("study.csv", "N,k,phase,r_N,pibar_N,Fbar_N\n".into()),
                        ("study.json", pretty(&summary)),
                    ],
                )?;
                println!("assumptions violated: {why}");
                return Ok(exit::OK);
            }
            Err(e) => return Err(e.into()),
        },
    };
    let (_, pi) = infinite(&spec)?;
    let report = convergence_study(&spec, &pi.pi, &tail, &k_list, &grid)?;
    let prediction = fit_constants(&spec, &tail, &grid)
        .ok()
        .filter(|c| !c.violated)
        .map(|c| c.tail_ratio_limit(&spec, &pi.pi))
        .transpose()?;
    let tail_seq = tail_ratio(&pi.pi, &tail, &grid, prediction)?;
    let last_seq = last_level_ratio(&spec, &tail, &grid)?;
    let mut summary = serde_json::to_value(&report)?;
    if let Value::Object(map) = &mut summary {
        map.remove("rows");
        map.insert("tail_ratio".into(), serde_json::to_value(&tail_seq)?);
        map.insert("last_level_ratio".into(), serde_json::to_value(&last_seq)?);
    }
    write_out(
        out,
        &[
            ("study.csv", report.to_csv()),
            ("study.json", pretty(&summary)),
        ],
    )?;
    if report.assumptions_ok {
        println!("study {}", if report.pass { "passed" } else { "failed" });
    } else {
        println!("assumptions violated: {}", report.context);
    }
    Ok(exit::OK)
}

fn loss(
    map: &Path,
    svc: &str,
    n_grid: &str,
    asymptotic: bool,
    simulate: Option<(u64, u64, usize)>,
    k_max: usize,
    out: &OutDir,
) -> Result<u8> {
    let grid = parse::levels(n_grid, "--N-grid")?;
    let map_spec =
        MapSpec::from_json(&parse::read(map)?).with_context(|| format!("in {}", map.display()))?;
    let service = parse::service(svc)?;
    let model = embed_chain(
        &map_spec,
        &service,
        &EmbedOptions {
            k_max,
            ..EmbedOptions::default()
        },
    )?;
    if asymptotic {
        loss_asymptotic(&model.service, model.map.rate(), grid[0])?;
    }
    let mut csv = String::from("N,loss_exact,loss_asymptotic,ratio");
    if simulate.is_some() {
        csv.push_str(",mc_loss,mc_se,mc_lost");
    }
    csv.push('\n');
    for &n in &grid {
        let exact = loss_exact(&model, n)?;
        let (asym, ratio) = if asymptotic {
            let a = loss_asymptotic(&model.service, model.map.rate(), n)?;
            (format!("{a:.17e}"), format!("{:.17e}", exact / a))
        } else {
            (String::new(), String::new())
        };
        let _ = write!(csv, "{n},{exact:.17e},{asym},{ratio}");
        if let Some((seed, arrivals, reps)) = simulate {
            let est = mc_queue(&model.map, &model.service, n, arrivals, reps, seed)?;
            let _ = write!(
                csv,
                ",{:.17e},{:.17e},{}",
                est.estimate.mean, est.estimate.se, est.lost
            );
        }
        csv.push('\n');
    }
    let summary = json!({
        "rho": model.rho,
        "rate": model.map.rate(),
        "service_mean": model.service.mean(),
        "embedding": serde_json::to_value(&model.report)?,
        "explicit_blocks": model.k_max + 2,
        "simulation": simulate.map(|(seed, arrivals, reps)| json!({
            "seed": seed, "arrivals": arrivals, "replications": reps
        })),
    });
    write_out(
        out,
        &[("loss.csv", csv), ("summary.json", pretty(&summary))],
    )?;
    println!("wrote {} capacities to {}", grid.len(), out.out.display());
    Ok(exit::OK)
}

struct Check {
    name: &'static str,
    value: Result<f64>,
    tolerance: f64,
}

fn max_level_gap(a: &LevelVector, b: &LevelVector, upto: usize) -> f64 {
    (0..=upto)
        .map(|k| (a.level(k) - b.level(k)).amax())
        .fold(0.0, f64::max)
}

fn verify(config: &Path, n: usize, levels: usize) -> Result<u8> {
    let spec = recurrent_chain(config)?;
    if levels >= n {
        return usage("--levels must be below --N");
    }
    let heavy = [spec.a_family(), spec.b_up_family()].iter().any(|f| {
        matches!(
            f.tail().map(|t| &t.weights),
            Some(TailWeights::PowerLaw { .. })
        )
    });
    let (sol, pi) = infinite(&spec)?;
    let mut checks = Vec::new();

    let stationary = || -> Result<f64> {
        let p = FiniteChainSpec::last_column(&spec, n)?.assemble();
        let pn = LevelVector::from_flat(&spec, n, &gth(&p)?);
        Ok(max_level_gap(&pn, &pi.pi, levels))
    };
    checks.push(Check {
        name: "stationary vs GTH",
        value: stationary(),
        tolerance: if heavy { 1e-5 } else { 1e-8 },
    });

    let kmax = levels.min(10);
    let passage = || -> Result<f64> {
        let jump = spec.max_jump().map_or(64, |s| s as usize);
        let r = RFamily::new(&spec, &sol, jump, 1e-15)?;
        let u = PassageVectors::new(&spec, &sol, &r, kmax)?;
        let fp = first_passage_solve(&spec, n, kmax, if heavy { 1e-8 } else { 1e-10 })?;
        Ok((0..=kmax)
            .map(|k| (u.u(k) - &fp.u[k]).amax())
            .fold(0.0, f64::max))
    };
    checks.push(Check {
        name: "first passage vs truncated solve",
        value: passage(),
        tolerance: 1e-6,
    });

    let w = levels.min(6);
    let deviation = || -> Result<f64> {
        let win = DeviationWindow::build(&spec, &sol, &pi, w, w)?;
        let d = deviation_d_window(&win, &pi.pi)?;
        let def = h_definitional(&spec, n, (0, 0))?;
        let mut worst: f64 = 0.0;
        for k in 0..=w {
            for l in 0..=w {
                worst = worst.max((def.projected_block(k, l) - d.block(k, l)).amax());
            }
        }
        Ok(worst)
    };
    checks.push(Check {
        name: "deviation vs definitional H",
        value: deviation(),
        tolerance: if heavy { 1e-4 } else { 1e-6 },
    });

    let mut pass = true;
    let rows: Vec<Value> = checks
        .into_iter()
        .map(|c| match c.value {
            Ok(v) => {
                let ok = v < c.tolerance;
                pass &= ok;
                json!({ "check": c.name, "value": v, "tolerance": c.tolerance, "pass": ok })
            }
            Err(e) => {
                pass = false;
                json!({ "check": c.name, "error": format!("{e:#}"), "pass": false })
            }
        })
        .collect();
    print!("{}", pretty(&json!({ "checks": rows, "pass": pass })));
    Ok(if pass { exit::OK } else { exit::FAILED })
}

fn preset(name: &str) -> Result<u8> {
    let Some(spec) = presets::by_name(name) else {
        return usage(format!("unknown preset {name:?}; use sc1, mm1, mp2 or hc1"));
    };
    println!("{}", spec.to_json()?);
    Ok(exit::OK)
}
