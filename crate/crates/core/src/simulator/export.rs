//! CSV export of an episode log. Ids are written 1-based.
//!
//! - `stages.csv`: `stage,time_s,bus,stop,activation_s,hold_s,idle_hold_s,controlled,boarded,alighted,mean_h_s,sigma_h_s,headways_s`
//!   where `headways_s` lists `h_b` for buses 1..n_B separated by `;`.
//! - `passengers.csv`: `id,origin,destination,type,arrive_s,board_s,alight_s,bus,class`
//!   with empty cells for missing timestamps.
//! - `trajectories.csv`: `time_s,bus,odometer_m,position_m`.

use std::io::Write;
use std::path::Path;

use super::EpisodeLog;

pub const STAGES_HEADER: [&str; 13] = [
    "stage",
    "time_s",
    "bus",
    "stop",
    "activation_s",
    "hold_s",
    "idle_hold_s",
    "controlled",
    "boarded",
    "alighted",
    "mean_h_s",
    "sigma_h_s",
    "headways_s",
];

pub const PASSENGERS_HEADER: [&str; 9] =
    ["id", "origin", "destination", "type", "arrive_s", "board_s", "alight_s", "bus", "class"];

pub const TRAJECTORIES_HEADER: [&str; 4] = ["time_s", "bus", "odometer_m", "position_m"];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_stages(log: &EpisodeLog, out: impl Write) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(STAGES_HEADER)?;
    for s in &log.stages {
        let headways = s.headways_s.iter().map(|h| h.to_string()).collect::<Vec<_>>().join(";");
        w.write_record([
            s.index.to_string(),
            s.time_s.to_string(),
            (s.bus + 1).to_string(),
            (s.stop + 1).to_string(),
            s.activation_s.to_string(),
            s.hold_s.to_string(),
            s.idle_hold_s.to_string(),
            u8::from(s.controlled).to_string(),
            s.boarded.to_string(),
            s.alighted.to_string(),
            s.mean_h_s.to_string(),
            s.sigma_h_s.to_string(),
            headways,
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_passengers(log: &EpisodeLog, out: impl Write) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(PASSENGERS_HEADER)?;
    for p in &log.passengers {
        w.write_record([
            p.id.to_string(),
            (p.origin + 1).to_string(),
            (p.destination + 1).to_string(),
            p.kind.label().to_string(),
            p.arrive_s.to_string(),
            opt(p.board_s),
            opt(p.alight_s),
            p.bus.map(|b| (b + 1).to_string()).unwrap_or_default(),
            p.class().label().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trajectories(log: &EpisodeLog, out: impl Write) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRAJECTORIES_HEADER)?;
    for t in &log.trajectories {
        w.write_record([
            t.time_s.to_string(),
            (t.bus + 1).to_string(),
            t.odometer_m.to_string(),
            t.position_m.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the three CSV files into `dir`, which must exist.
pub fn write_episode(log: &EpisodeLog, dir: &Path) -> csv::Result<()> {
    let create = |name: &str| std::fs::File::create(dir.join(name)).map(std::io::BufWriter::new);
    write_stages(log, create("stages.csv")?)?;
    write_passengers(log, create("passengers.csv")?)?;
    write_trajectories(log, create("trajectories.csv")?)?;
    Ok(())
}
