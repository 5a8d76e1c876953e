//! The five subcommands.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use cub_core::assign::{
    brute_force_optimal, improve_swaps, next_arrangement, sequential_construct, Arrangement,
    GroupSpec, DEFAULT_MAX_PASSES,
};
use cub_core::evaluate::compare;

use crate::config::PipelineConfig;
use crate::files::{write_atomic, StateLock};
use crate::pipeline::{
    arrangement_text, cluster_and_classify, clusters_csv, coefficients_csv, degradation_ratio,
    evaluate_survey_file, labels_csv, read_survey_or_coefficients, to_pretty_json, ArrangementFile,
    StateFile, SummaryFile,
};

pub fn cmd_evaluate(survey: &Path, cfg: &PipelineConfig) -> Result<()> {
    let coefficients = evaluate_survey_file(survey, cfg)?;
    fs::create_dir_all(&cfg.out_dir)
        .with_context(|| format!("cannot create output directory {}", cfg.out_dir.display()))?;
    let path = cfg.out_dir.join("coefficients.csv");
    write_atomic(&path, coefficients_csv(&coefficients).as_bytes())?;
    println!(
        "evaluated {} students -> {}",
        coefficients.len(),
        path.display()
    );
    Ok(())
}

pub fn cmd_arrange(
    input: &Path,
    groups_flag: Option<Vec<usize>>,
    verify: bool,
    cfg: &PipelineConfig,
) -> Result<()> {
    let coefficients = read_survey_or_coefficients(input, cfg)?;
    let classified = cluster_and_classify(&coefficients, cfg)?;
    warn_if_unconverged(&classified);
    let spec = resolve_spec(groups_flag, cfg)?;
    spec.validate_roster(classified.labeled.len())?;

    let cost_model = crate::pipeline::cost_model(cfg);
    let constructed = sequential_construct(&classified.labeled, &spec, &cost_model)?;
    let arrangement = improve_swaps(
        &constructed,
        &classified.labeled,
        &cost_model,
        DEFAULT_MAX_PASSES,
    )?;

    fs::create_dir_all(&cfg.out_dir)
        .with_context(|| format!("cannot create output directory {}", cfg.out_dir.display()))?;
    write_atomic(
        &cfg.out_dir.join("coefficients.csv"),
        coefficients_csv(&coefficients).as_bytes(),
    )?;
    write_atomic(
        &cfg.out_dir.join("clusters.csv"),
        clusters_csv(&classified.assignments).as_bytes(),
    )?;
    write_atomic(
        &cfg.out_dir.join("labels.csv"),
        labels_csv(&classified.labeled).as_bytes(),
    )?;
    write_arrangement_files(&cfg.out_dir, &arrangement, 0)?;

    let state = StateFile::new(&arrangement, &classified.labeled, cfg)?;
    let state_path = cfg.out_dir.join("rotation_state.json");
    write_atomic(&state_path, &to_pretty_json(&state)?)?;

    if verify {
        let optimal = brute_force_optimal(&classified.labeled, &spec, &cost_model)?;
        println!(
            "verify: objective {} vs exhaustive optimum {}",
            arrangement.objective, optimal.objective
        );
    }

    print!("{}", arrangement_text(&arrangement.groups));
    println!("objective: {}", arrangement.objective);
    println!("state: {}", state_path.display());
    Ok(())
}

pub fn cmd_rotate(state_path: &Path, cfg: &PipelineConfig) -> Result<()> {
    let _lock = StateLock::acquire(state_path)?;
    let mut state = StateFile::load(state_path)?;
    let out_dir = if cfg.out_dir_explicit {
        cfg.out_dir.clone()
    } else {
        state_path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."))
    };
    fs::create_dir_all(&out_dir)
        .with_context(|| format!("cannot create output directory {}", out_dir.display()))?;

    let arrangement = rotate_once(&mut state)?;
    let index = state.history.len() - 1;
    write_arrangement_files(&out_dir, &arrangement, index)?;
    write_atomic(state_path, &to_pretty_json(&state)?)?;

    println!(
        "arrangement {index}: objective {}, degradation ratio {}",
        arrangement.objective,
        degradation_ratio(state.objectives[0], arrangement.objective)
    );
    Ok(())
}

pub fn cmd_compare(a: &Path, b: &Path) -> Result<()> {
    let report = compare(&load_arrangement(a)?, &load_arrangement(b)?)?;
    print!("{}", String::from_utf8_lossy(&to_pretty_json(&report)?));
    Ok(())
}

pub fn cmd_pipeline(
    survey: &Path,
    count: usize,
    groups_flag: Option<Vec<usize>>,
    cfg: &PipelineConfig,
) -> Result<()> {
    anyhow::ensure!(count >= 1, "--count must be at least 1");
    let coefficients = evaluate_survey_file(survey, cfg)?;
    let classified = cluster_and_classify(&coefficients, cfg)?;
    warn_if_unconverged(&classified);
    let spec = resolve_spec(groups_flag, cfg)?;
    spec.validate_roster(classified.labeled.len())?;

    let cost_model = crate::pipeline::cost_model(cfg);
    let constructed = sequential_construct(&classified.labeled, &spec, &cost_model)?;
    let first = improve_swaps(
        &constructed,
        &classified.labeled,
        &cost_model,
        DEFAULT_MAX_PASSES,
    )?;

    fs::create_dir_all(&cfg.out_dir)
        .with_context(|| format!("cannot create output directory {}", cfg.out_dir.display()))?;
    write_atomic(
        &cfg.out_dir.join("coefficients.csv"),
        coefficients_csv(&coefficients).as_bytes(),
    )?;
    write_atomic(
        &cfg.out_dir.join("clusters.csv"),
        clusters_csv(&classified.assignments).as_bytes(),
    )?;
    write_atomic(
        &cfg.out_dir.join("labels.csv"),
        labels_csv(&classified.labeled).as_bytes(),
    )?;
    write_arrangement_files(&cfg.out_dir, &first, 0)?;

    let mut state = StateFile::new(&first, &classified.labeled, cfg)?;
    let state_path = cfg.out_dir.join("rotation_state.json");
    write_atomic(&state_path, &to_pretty_json(&state)?)?;
    println!(
        "arrangement 0: objective {}, degradation ratio {}",
        first.objective,
        degradation_ratio(first.objective, first.objective)
    );

    let _lock = StateLock::acquire(&state_path)?;
    for index in 1..count {
        let arrangement = rotate_once(&mut state)?;
        write_arrangement_files(&cfg.out_dir, &arrangement, index)?;
        write_atomic(&state_path, &to_pretty_json(&state)?)?;
        println!(
            "arrangement {index}: objective {}, degradation ratio {}",
            arrangement.objective,
            degradation_ratio(state.objectives[0], arrangement.objective)
        );
    }

    let summary = SummaryFile {
        degradation_ratios: state
            .objectives
            .iter()
            .map(|&o| degradation_ratio(state.objectives[0], o))
            .collect(),
        objectives: state.objectives.clone(),
    };
    let summary_path = cfg.out_dir.join("summary.json");
    write_atomic(&summary_path, &to_pretty_json(&summary)?)?;
    println!("summary: {}", summary_path.display());
    Ok(())
}

/// Advance the rotation by one arrangement, updating history and objectives.
fn rotate_once(state: &mut StateFile) -> Result<Arrangement> {
    let roster = state.labeled_roster()?;
    let cost_model = state.cost_model();
    let mut sizes: Vec<usize> = state
        .history
        .last()
        .map(|groups| groups.iter().map(|g| g.len()).collect())
        .unwrap_or_default();
    sizes.sort_unstable();
    let spec = GroupSpec::new(sizes)?;
    let mut rotation = state.rotation_state()?;
    let arrangement = next_arrangement(&mut rotation, &roster, &spec, &cost_model)?;
    state.history = rotation.history;
    state.objectives.push(arrangement.objective);
    Ok(arrangement)
}

fn warn_if_unconverged(classified: &crate::pipeline::ClassifiedRoster) {
    if !classified.fcm.converged {
        eprintln!(
            "warning: clustering hit the iteration cap ({} iterations) before converging",
            classified.fcm.iterations
        );
    }
}

fn resolve_spec(groups_flag: Option<Vec<usize>>, cfg: &PipelineConfig) -> Result<GroupSpec> {
    let sizes = groups_flag
        .or_else(|| cfg.group_sizes.clone())
        .context("no group sizes configured; pass --groups or set group_sizes in the config")?;
    Ok(GroupSpec::new(sizes)?)
}

fn write_arrangement_files(out_dir: &Path, arrangement: &Arrangement, index: usize) -> Result<()> {
    let payload = ArrangementFile {
        groups: arrangement.groups.clone(),
        objective: arrangement.objective,
        sequence_index: index,
    };
    write_atomic(
        &out_dir.join(format!("arrangement_{index:03}.json")),
        &to_pretty_json(&payload)?,
    )?;
    write_atomic(
        &out_dir.join(format!("arrangement_{index:03}.txt")),
        arrangement_text(&arrangement.groups).as_bytes(),
    )?;
    Ok(())
}

fn load_arrangement(path: &Path) -> Result<Arrangement> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("cannot read arrangement {}", path.display()))?;
    let file: ArrangementFile = serde_json::from_str(&text)
        .with_context(|| format!("invalid arrangement file {}", path.display()))?;
    Ok(Arrangement {
        groups: file.groups,
        objective: file.objective,
    })
}
