use std::io::Write;

use crate::ocean::Vec3;

#[derive(Debug, Clone, PartialEq)]
pub struct AuvTrace {
    pub position: Vec3,
    pub power: f64,
    pub velocity: Vec3,
    pub energy: f64,
}

/// Snapshot of the whole team after one slice.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub slot: usize,
    pub slice: usize,
    pub gamma_e: f64,
    pub kl: f64,
    pub covert: bool,
    pub auvs: Vec<AuvTrace>,
}

pub fn write_trace_csv<W: Write>(out: W, records: &[TraceRecord]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let n = records.first().map_or(0, |r| r.auvs.len());
    let mut header: Vec<String> = ["slot", "slice", "gamma_e", "kl", "covert"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for i in 0..n {
        for field in ["x", "y", "z", "power", "vx", "vy", "vz", "energy"] {
            header.push(format!("auv{i}_{field}"));
        }
    }
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![
            r.slot.to_string(),
            r.slice.to_string(),
            r.gamma_e.to_string(),
            r.kl.to_string(),
            u8::from(r.covert).to_string(),
        ];
        for a in &r.auvs {
            for v in [
                a.position.x,
                a.position.y,
                a.position.z,
                a.power,
                a.velocity.x,
                a.velocity.y,
                a.velocity.z,
                a.energy,
            ] {
                row.push(v.to_string());
            }
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
