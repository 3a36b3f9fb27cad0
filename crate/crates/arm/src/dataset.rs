//! Dataset generation and the LPDS on-disk format.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use lplab_substrate::Rng;
use ndarray::Array2;

use crate::config::ArmConfig;
use crate::error::{ArmError, Result};
use crate::kinematics::{inverse_kinematics, EndState};
use crate::minjerk::min_jerk_trajectory;
use crate::trajectory::{execute, Trajectory};

pub const END_STATE_DIM: usize = 3;
const MAGIC: &[u8; 4] = b"LPDS";
const VERSION: u32 = 1;

const DURATION_MIN: f64 = 0.8;
const DURATION_MAX: f64 = 1.8;
const MAX_ATTEMPTS: usize = 20;

#[derive(Debug, Clone)]
pub struct DatasetRecord {
    pub trajectory: Trajectory,
    pub end_state: EndState,
}

/// Draw a goal uniformly over the workspace: area-uniform over the annulus
/// sector, orientation uniform around the goal's polar angle.
pub fn sample_goal(cfg: &ArmConfig, rng: &mut Rng) -> EndState {
    let ws = &cfg.workspace;
    let r2 = rng.uniform(ws.radius_min * ws.radius_min, ws.radius_max * ws.radius_max);
    let r = r2.sqrt();
    let theta = rng.uniform(
        ws.sector_center - ws.angle_span / 2.0,
        ws.sector_center + ws.angle_span / 2.0,
    );
    let phi = theta
        + rng.uniform(
            -ws.orientation_span / 2.0,
            ws.orientation_span / 2.0,
        );
    EndState::new(r * theta.cos(), r * theta.sin(), phi)
}

/// Generate `count` (trajectory, end state) records. Each record gets its
/// own derived rng stream, so sharded generation concatenates
/// deterministically by record index.
pub fn generate_dataset(count: usize, cfg: &ArmConfig, rng: &Rng) -> Result<Vec<DatasetRecord>> {
    (0..count)
        .map(|i| {
            let mut r = rng.derive_index(i as u64);
            generate_record(cfg, &mut r).map_err(|source| ArmError::Generation {
                record: i,
                attempts: MAX_ATTEMPTS,
                source: Box::new(source),
            })
        })
        .collect()
}

fn generate_record(cfg: &ArmConfig, rng: &mut Rng) -> Result<DatasetRecord> {
    let mut last_err = None;
    for attempt in 0..MAX_ATTEMPTS {
        let goal = sample_goal(cfg, rng);
        // Later attempts stretch the duration toward the horizon to tame
        // peak velocities.
        let hi = (DURATION_MAX + 0.1 * attempt as f64).min(cfg.horizon());
        let duration = rng.uniform(DURATION_MIN, hi);
        let result = inverse_kinematics(goal, cfg).and_then(|angles| {
            let traj = min_jerk_trajectory(cfg.home_angles, angles, duration, cfg)?;
            let end_state = execute(&traj, cfg)?;
            Ok(DatasetRecord {
                trajectory: traj,
                end_state,
            })
        });
        match result {
            Ok(rec) => return Ok(rec),
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.expect("at least one attempt"))
}

pub fn save_dataset(records: &[DatasetRecord], cfg: &ArmConfig, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_u32::<LittleEndian>(VERSION)?;
    w.write_u32::<LittleEndian>(records.len() as u32)?;
    w.write_u32::<LittleEndian>(cfg.t as u32)?;
    w.write_u32::<LittleEndian>(cfg.m as u32)?;
    w.write_u32::<LittleEndian>(END_STATE_DIM as u32)?;
    for rec in records {
        for v in rec.trajectory.velocities.iter() {
            w.write_f64::<LittleEndian>(*v)?;
        }
        for v in rec.end_state.to_array().iter() {
            w.write_f64::<LittleEndian>(*v)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<(Vec<DatasetRecord>, usize, usize)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(ArmError::Format(format!("bad magic {magic:?}")));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != VERSION {
        return Err(ArmError::Format(format!("unsupported version {version}")));
    }
    let count = r.read_u32::<LittleEndian>()? as usize;
    let t = r.read_u32::<LittleEndian>()? as usize;
    let m = r.read_u32::<LittleEndian>()? as usize;
    let ns = r.read_u32::<LittleEndian>()? as usize;
    if ns != END_STATE_DIM {
        return Err(ArmError::Format(format!("unexpected end-state dim {ns}")));
    }
    let mut records = Vec::with_capacity(count);
    for _ in 0..count {
        let mut vel = vec![0.0; t * m];
        r.read_f64_into::<LittleEndian>(&mut vel)?;
        let mut es = vec![0.0; ns];
        r.read_f64_into::<LittleEndian>(&mut es)?;
        records.push(DatasetRecord {
            trajectory: Trajectory::new(
                Array2::from_shape_vec((t, m), vel)
                    .map_err(|e| ArmError::Format(e.to_string()))?,
            ),
            end_state: EndState::from_slice(&es),
        });
    }
    Ok((records, t, m))
}

/// CSV preview: one row per record, full f64 round-trip precision.
pub fn export_csv(records: &[DatasetRecord], cfg: &ArmConfig, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let mut header = Vec::new();
    for t in 0..cfg.t {
        for j in 0..cfg.m {
            header.push(format!("t{t}_j{j}"));
        }
    }
    header.extend(["x".into(), "y".into(), "phi".into()]);
    writeln!(w, "{}", header.join(","))?;
    for rec in records {
        let mut fields: Vec<String> = rec
            .trajectory
            .velocities
            .iter()
            .map(|v| format!("{v}"))
            .collect();
        fields.push(format!("{}", rec.end_state.x));
        fields.push(format!("{}", rec.end_state.y));
        fields.push(format!("{}", rec.end_state.phi));
        writeln!(w, "{}", fields.join(","))?;
    }
    w.flush()?;
    Ok(())
}
