#![allow(dead_code)]

use std::fs;
use std::os::unix::fs::PermissionsExt;
use std::path::{Path, PathBuf};
use std::time::Duration;

use nalgebra::DMatrix;
use rand::Rng;

use pphpc::harness::{CandidateSpec, HANDSHAKE};
use pphpc::sim::{AgentKind, World};
use pphpc::SimParams;

pub const PPHPC: &str = env!("CARGO_BIN_EXE_pphpc");

pub fn small_params(iterations: u32) -> SimParams {
    SimParams::from_values(&[15, 15, 30, 15, iterations, 4, 20, 1, 1, 2, 2, 4, 5, 10]).unwrap()
}

pub fn random_params<R: Rng>(rng: &mut R, max_side: u32, iterations: u32) -> SimParams {
    let gx = rng.gen_range(1..=max_side);
    let gy = rng.gen_range(1..=max_side);
    let cells = gx * gy;
    SimParams::from_values(&[
        gx,
        gy,
        rng.gen_range(0..=cells.min(400)),
        rng.gen_range(0..=cells.min(200)),
        iterations,
        rng.gen_range(0..=40),
        rng.gen_range(0..=40),
        rng.gen_range(1..=3),
        rng.gen_range(1..=3),
        rng.gen_range(1..=20),
        rng.gen_range(1..=20),
        rng.gen_range(0..=100),
        rng.gen_range(0..=100),
        rng.gen_range(1..=20),
    ])
    .unwrap()
}

fn population(world: &World, kind: AgentKind) -> u64 {
    world.agents().iter().filter(|a| a.kind == kind).count() as u64
}

fn assert_energies_positive(world: &World, phase: &str) -> Result<(), String> {
    match world.agents().iter().find(|a| a.energy < 1) {
        Some(a) => Err(format!(
            "iteration {} after {phase}: agent with energy {}",
            world.iteration(),
            a.energy
        )),
        None => Ok(()),
    }
}

/// Steps a world phase by phase and checks the accounting identities, the
/// food statistics against a full grid scan and energy positivity.
pub fn check_invariants(params: &SimParams, seed: u64) -> Result<(), String> {
    let mut world = World::new(*params, seed).map_err(|e| e.to_string())?;
    let cells = params.cell_count() as f64;
    for t in 0..params.iterations {
        let prey0 = population(&world, AgentKind::Prey);
        let pred0 = population(&world, AgentKind::Predator);
        let moved = world.move_phase();
        assert_energies_positive(&world, "move")?;
        world.grow_food_phase();
        let acted = world.act_phase();
        assert_energies_positive(&world, "act")?;
        if acted.predation > pred0 {
            return Err(format!(
                "iteration {t}: {} prey eaten by {pred0} predators",
                acted.predation
            ));
        }
        let births_prey = moved.births(AgentKind::Prey) + acted.births(AgentKind::Prey);
        let deaths_prey = moved.deaths(AgentKind::Prey) + acted.deaths(AgentKind::Prey);
        let births_pred = moved.births(AgentKind::Predator) + acted.births(AgentKind::Predator);
        let deaths_pred = moved.deaths(AgentKind::Predator) + acted.deaths(AgentKind::Predator);
        let row = world.collect_outputs();
        if row.total_prey + deaths_prey != prey0 + births_prey {
            return Err(format!("iteration {t}: prey accounting broken"));
        }
        if row.total_predators + deaths_pred != pred0 + births_pred {
            return Err(format!("iteration {t}: predator accounting broken"));
        }
        let mut zeros = 0u64;
        let mut sum = 0u64;
        for y in 0..params.grid_y {
            for x in 0..params.grid_x {
                let c = world.countdown(x, y);
                if c > params.cell_food_restart {
                    return Err(format!("iteration {t}: countdown {c} above restart value"));
                }
                zeros += u64::from(c == 0);
                sum += u64::from(c);
            }
        }
        if row.total_food != zeros || row.mean_c != sum as f64 / cells {
            return Err(format!(
                "iteration {t}: food statistics disagree with grid scan"
            ));
        }
    }
    Ok(())
}

/// Direct double-loop energy statistic.
pub fn energy_oracle(x: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
    let dist = |a: &DMatrix<f64>, i: usize, b: &DMatrix<f64>, j: usize| -> f64 {
        (0..a.ncols())
            .map(|c| (a[(i, c)] - b[(j, c)]).powi(2))
            .sum::<f64>()
            .sqrt()
    };
    let (n, m) = (x.nrows(), y.nrows());
    let (nf, mf) = (n as f64, m as f64);
    let mut xy = 0.0;
    for i in 0..n {
        for j in 0..m {
            xy += dist(x, i, y, j);
        }
    }
    let mut xx = 0.0;
    for i in 0..n {
        for j in 0..n {
            xx += dist(x, i, x, j);
        }
    }
    let mut yy = 0.0;
    for i in 0..m {
        for j in 0..m {
            yy += dist(y, i, y, j);
        }
    }
    nf * mf / (nf + mf) * (2.0 * xy / (nf * mf) - xx / (nf * nf) - yy / (mf * mf))
}

/// Step-up formula evaluated literally: for each rank i, the minimum over
/// j >= i of m * p_(j) / j, capped at 1 and floored at the raw value.
pub fn bh_oracle(p: &[f64]) -> Vec<f64> {
    let m = p.len();
    let mut sorted: Vec<(usize, f64)> = p.iter().copied().enumerate().collect();
    sorted.sort_by(|a, b| a.1.total_cmp(&b.1));
    let mut out = vec![0.0; m];
    for i in 0..m {
        let mut best = f64::INFINITY;
        for (j, &(_, pj)) in sorted.iter().enumerate().skip(i) {
            best = best.min(m as f64 * pj / (j + 1) as f64);
        }
        out[sorted[i].0] = best.min(1.0).max(sorted[i].1);
    }
    out
}

pub fn random_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-5.0..5.0))
}

/// Writes an executable shell script and returns its path.
pub fn script(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, format!("#!/bin/sh\n{body}\n")).unwrap();
    fs::set_permissions(&path, fs::Permissions::from_mode(0o755)).unwrap();
    path
}

fn answers_check(rest: &str) -> String {
    format!("if [ \"$1\" = --check ]; then echo '{HANDSHAKE}'; exit 0; fi\n{rest}")
}

/// The five standard fixtures: missing file, bad handshake, sleeper,
/// malformed CSV and the wrapped built-in simulator.
pub fn fixture_specs(dir: &Path) -> Vec<CandidateSpec> {
    let bad_handshake = script(dir, "bad_handshake.sh", "echo 'hello world'");
    let sleeper = script(dir, "sleeper.sh", &answers_check("sleep 30"));
    let malformed = script(
        dir,
        "malformed.sh",
        &answers_check("echo total_prey,total_predators\necho 1,2"),
    );
    let reference = script(
        dir,
        "reference.sh",
        &format!("exec '{PPHPC}' candidate \"$@\""),
    );
    let short = |spec: CandidateSpec| CandidateSpec {
        timeout_smoke: Duration::from_millis(1500),
        timeout_full: Duration::from_secs(60),
        ..spec
    };
    vec![
        short(CandidateSpec::new("missing", dir.join("does-not-exist"))),
        short(CandidateSpec::new("bad_handshake", bad_handshake)),
        short(CandidateSpec::new("sleeper", sleeper)),
        short(CandidateSpec::new("malformed", malformed)),
        short(CandidateSpec::new("reference", reference)),
    ]
}

/// Processes whose command line contains `marker`.
pub fn processes_with(marker: &str) -> Vec<String> {
    let mut found = Vec::new();
    for entry in fs::read_dir("/proc").unwrap().flatten() {
        if !entry
            .file_name()
            .to_string_lossy()
            .bytes()
            .all(|b| b.is_ascii_digit())
        {
            continue;
        }
        if let Ok(cmd) = fs::read(entry.path().join("cmdline")) {
            let cmd = String::from_utf8_lossy(&cmd).replace('\0', " ");
            if cmd.contains(marker) {
                found.push(cmd);
            }
        }
    }
    found
}
