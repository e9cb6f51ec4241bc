//! CSV persistence of flock samples.
//!
//! Layout:
//!
//! ```text
//! # schema_version,1
//! # flock,<id>,<length_m>,<width_m>,<capacity>,<initial_birds>,<mdw0_g>,<dfcpb0>,<nlbpa0>
//! flock_id,day,t_min,t_avg,t_max,h_min,h_avg,h_max,mdw_g,dfc_kg,dm_birds,nlb
//! 0,1,29.9,31.4,32.9,...
//! ```
//!
//! The comment lines carry what the daily rows cannot: the schema version
//! and, per flock, the house geometry and day-0 state. Derived per-bird
//! and per-area columns are recomputed on load.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use super::DatasetError;
use crate::domain::{DayOutcome, DayPlan, FlockSample, HouseGeometry, InitialConditions};

pub const SAMPLES_SCHEMA_VERSION: u32 = 1;

pub const COLUMNS: [&str; 12] = [
    "flock_id", "day", "t_min", "t_avg", "t_max", "h_min", "h_avg", "h_max", "mdw_g", "dfc_kg",
    "dm_birds", "nlb",
];

pub fn write_samples<W: Write>(samples: &[FlockSample], mut out: W) -> Result<(), DatasetError> {
    writeln!(out, "# schema_version,{SAMPLES_SCHEMA_VERSION}")?;
    for s in samples {
        let ic = &s.initial_conditions;
        writeln!(
            out,
            "# flock,{},{},{},{},{},{},{},{}",
            s.flock_id,
            s.house.length_m,
            s.house.width_m,
            s.house.capacity,
            s.initial_birds,
            ic.mdw,
            ic.dfcpb,
            ic.nlbpa
        )?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(COLUMNS).map_err(csv_err)?;
    for s in samples {
        for (p, o) in s.plans.iter().zip(&s.outcomes) {
            let row = [
                s.flock_id.to_string(),
                p.day.to_string(),
                p.t_min.to_string(),
                p.t_avg.to_string(),
                p.t_max.to_string(),
                p.h_min.to_string(),
                p.h_avg.to_string(),
                p.h_max.to_string(),
                o.mdw.to_string(),
                o.dfc.to_string(),
                o.dm.to_string(),
                o.nlb.to_string(),
            ];
            w.write_record(&row).map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn store_samples(samples: &[FlockSample], path: impl AsRef<Path>) -> Result<(), DatasetError> {
    let mut buf = Vec::new();
    write_samples(samples, &mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn load_samples(path: impl AsRef<Path>) -> Result<Vec<FlockSample>, DatasetError> {
    read_samples(std::fs::File::open(path)?)
}

fn csv_err(e: csv::Error) -> DatasetError {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => DatasetError::Io(io),
        other => DatasetError::Parse {
            line,
            day: None,
            message: format!("{other:?}"),
        },
    }
}

struct Meta {
    house: HouseGeometry,
    initial_birds: u32,
    initial_conditions: InitialConditions,
}

fn parse_meta(line: usize, fields: &[&str]) -> Result<(u32, Meta), DatasetError> {
    let err = |message: String| DatasetError::Parse {
        line,
        day: None,
        message,
    };
    if fields.len() != 9 {
        return Err(err(format!(
            "flock metadata needs 8 values, found {}",
            fields.len() - 1
        )));
    }
    let f = |k: usize| {
        fields[k]
            .trim()
            .parse::<f64>()
            .map_err(|e| err(format!("metadata field {k}: {e}")))
    };
    let u = |k: usize| {
        fields[k]
            .trim()
            .parse::<u32>()
            .map_err(|e| err(format!("metadata field {k}: {e}")))
    };
    let house = HouseGeometry::new(f(2)?, f(3)?, u(4)?);
    house.validate().map_err(|e| err(e.to_string()))?;
    Ok((
        u(1)?,
        Meta {
            house,
            initial_birds: u(5)?,
            initial_conditions: InitialConditions {
                mdw: f(6)?,
                dfcpb: f(7)?,
                nlbpa: f(8)?,
            },
        },
    ))
}

pub fn read_samples<R: Read>(mut input: R) -> Result<Vec<FlockSample>, DatasetError> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    let mut version = None;
    let mut meta = BTreeMap::new();
    for (k, raw) in text.lines().enumerate() {
        let Some(rest) = raw.strip_prefix('#') else {
            continue;
        };
        let fields: Vec<&str> = rest.trim().split(',').collect();
        match fields[0].trim() {
            "schema_version" => {
                let found = fields
                    .get(1)
                    .and_then(|v| v.trim().parse::<u32>().ok())
                    .ok_or_else(|| DatasetError::Parse {
                        line: k + 1,
                        day: None,
                        message: "unreadable schema version".into(),
                    })?;
                version = Some(found);
            }
            "flock" => {
                let (id, m) = parse_meta(k + 1, &fields)?;
                meta.insert(id, m);
            }
            _ => {}
        }
    }
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    match version {
        Some(SAMPLES_SCHEMA_VERSION) => {}
        Some(found) => {
            return Err(DatasetError::SchemaVersion {
                found,
                expected: SAMPLES_SCHEMA_VERSION,
            })
        }
        None => {
            return Err(DatasetError::Parse {
                line: 1,
                day: None,
                message: "missing '# schema_version' line".into(),
            })
        }
    }

    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(csv_err)?.clone();
    if headers.iter().map(str::trim).ne(COLUMNS) {
        return Err(DatasetError::Parse {
            line: headers.position().map(|p| p.line() as usize).unwrap_or(1),
            day: None,
            message: format!("header must be {}", COLUMNS.join(",")),
        });
    }

    let mut order: Vec<u32> = Vec::new();
    let mut flocks: BTreeMap<u32, (usize, FlockSample)> = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let field = |k: usize| -> Result<&str, DatasetError> {
            rec.get(k)
                .map(str::trim)
                .ok_or_else(|| DatasetError::Parse {
                    line,
                    day: None,
                    message: format!("missing column {}", COLUMNS[k]),
                })
        };
        let int = |k: usize| -> Result<u32, DatasetError> {
            field(k)?.parse().map_err(|e| DatasetError::Parse {
                line,
                day: None,
                message: format!("{}: {e}", COLUMNS[k]),
            })
        };
        let id = int(0)?;
        let day = int(1)?;
        let num = |k: usize| -> Result<f64, DatasetError> {
            field(k)?.parse().map_err(|e| DatasetError::Parse {
                line,
                day: Some(day),
                message: format!("{}: {e}", COLUMNS[k]),
            })
        };
        let located = |e: crate::domain::DomainError| DatasetError::Parse {
            line,
            day: Some(day),
            message: e.to_string(),
        };
        let plan = DayPlan {
            day,
            t_min: num(2)?,
            t_avg: num(3)?,
            t_max: num(4)?,
            h_min: num(5)?,
            h_avg: num(6)?,
            h_max: num(7)?,
        };
        plan.validate().map_err(located)?;
        let m = meta.get(&id).ok_or_else(|| DatasetError::Parse {
            line,
            day: Some(day),
            message: format!("no '# flock,{id},…' metadata line"),
        })?;
        let outcome = DayOutcome::from_raw(day, num(8)?, num(9)?, int(10)?, int(11)?, &m.house)
            .map_err(located)?;
        let entry = flocks.entry(id).or_insert_with(|| {
            order.push(id);
            (
                line,
                FlockSample {
                    flock_id: id,
                    house: m.house,
                    initial_birds: m.initial_birds,
                    initial_conditions: m.initial_conditions,
                    plans: Vec::new(),
                    outcomes: Vec::new(),
                },
            )
        });
        entry.1.plans.push(plan);
        entry.1.outcomes.push(outcome);
    }

    order
        .into_iter()
        .map(|id| {
            let (line, sample) = flocks.remove(&id).expect("recorded id");
            sample.validate().map_err(|e| DatasetError::Parse {
                line,
                day: None,
                message: format!("flock {id}: {e}"),
            })?;
            Ok(sample)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{generate_corpus, GeneratorConfig};

    #[test]
    fn roundtrip_is_lossless() {
        let samples = generate_corpus(&GeneratorConfig::default(), 12).unwrap();
        let mut buf = Vec::new();
        write_samples(&samples, &mut buf).unwrap();
        let back = read_samples(buf.as_slice()).unwrap();
        assert_eq!(back, samples);
        let text = String::from_utf8(buf).unwrap();
        assert!(text.lines().any(|l| l == COLUMNS.join(",")));
    }

    #[test]
    fn empty_file_is_empty_list() {
        assert!(read_samples(&b""[..]).unwrap().is_empty());
    }

    #[test]
    fn inverted_temperatures_name_the_day() {
        let samples = generate_corpus(&GeneratorConfig::default(), 1).unwrap();
        let mut bad = samples.clone();
        bad[0].plans[2].t_min = bad[0].plans[2].t_max + 1.0;
        let mut buf = Vec::new();
        write_samples(&bad, &mut buf).unwrap();
        match read_samples(buf.as_slice()) {
            Err(DatasetError::Parse {
                day: Some(3), line, ..
            }) => assert_eq!(line, 6),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn schema_version_is_checked() {
        let samples = generate_corpus(&GeneratorConfig::default(), 1).unwrap();
        let mut buf = Vec::new();
        write_samples(&samples, &mut buf).unwrap();
        let text =
            String::from_utf8(buf)
                .unwrap()
                .replacen("# schema_version,1", "# schema_version,7", 1);
        assert!(matches!(
            read_samples(text.as_bytes()),
            Err(DatasetError::SchemaVersion { found: 7, .. })
        ));
    }
}
