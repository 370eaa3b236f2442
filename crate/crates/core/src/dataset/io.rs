//! File formats.
//!
//! * check-in CSV: `user_id,location_id,lat,lon,local_time`
//! * MovieLens 1M: `UserID::MovieID::Rating::Timestamp`
//! * rating CSV: `user_id,item_id,value,timestamp`

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use chrono::NaiveDateTime;

use super::{Checkin, CheckinDataset, Rating, RatingDataset};
use crate::error::{Error, Result};

const CHECKIN_HEADER: [&str; 5] = ["user_id", "location_id", "lat", "lon", "local_time"];
const RATING_HEADER: [&str; 4] = ["user_id", "item_id", "value", "timestamp"];

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn parse_err(line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn field<'a>(rec: &'a csv::StringRecord, idx: usize, name: &str, line: u64) -> Result<&'a str> {
    rec.get(idx)
        .map(str::trim)
        .ok_or_else(|| parse_err(line, format!("missing column `{name}`")))
}

fn parse_num<T: std::str::FromStr>(s: &str, name: &str, line: u64) -> Result<T> {
    s.parse()
        .map_err(|_| parse_err(line, format!("bad {name} `{s}`")))
}

fn parse_local_time(s: &str, line: u64) -> Result<NaiveDateTime> {
    s.parse::<NaiveDateTime>()
        .or_else(|_| NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S%.f"))
        .map_err(|_| parse_err(line, format!("bad local_time `{s}`")))
}

fn check_header(rec: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    let got: Vec<&str> = rec.iter().map(str::trim).collect();
    if got != expected {
        return Err(parse_err(
            1,
            format!(
                "expected header `{}`, got `{}`",
                expected.join(","),
                got.join(",")
            ),
        ));
    }
    Ok(())
}

pub fn load_checkins(path: impl AsRef<Path>) -> Result<CheckinDataset> {
    read_checkins(open(path.as_ref())?)
}

/// Parses check-in CSV. Rows are rejected with their 1-based line number.
pub fn read_checkins<R: Read>(reader: R) -> Result<CheckinDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut records = Vec::new();
    let mut rows = rdr.records();
    match rows.next() {
        None => return Ok(CheckinDataset::default()),
        Some(header) => check_header(&header?, &CHECKIN_HEADER)?,
    }
    for row in rows {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() != CHECKIN_HEADER.len() {
            return Err(parse_err(
                line,
                format!("expected 5 columns, found {}", row.len()),
            ));
        }
        let lat: f64 = parse_num(field(&row, 2, "lat", line)?, "lat", line)?;
        let lon: f64 = parse_num(field(&row, 3, "lon", line)?, "lon", line)?;
        if !(-90.0..=90.0).contains(&lat) {
            return Err(parse_err(line, format!("lat {lat} outside [-90, 90]")));
        }
        if !(-180.0..=180.0).contains(&lon) {
            return Err(parse_err(line, format!("lon {lon} outside [-180, 180]")));
        }
        records.push(Checkin {
            user_id: parse_num(field(&row, 0, "user_id", line)?, "user_id", line)?,
            location_id: parse_num(field(&row, 1, "location_id", line)?, "location_id", line)?,
            lat,
            lon,
            local_time: parse_local_time(field(&row, 4, "local_time", line)?, line)?,
        });
    }
    Ok(CheckinDataset::new(records))
}

pub fn write_checkins_csv<W: Write>(ds: &CheckinDataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CHECKIN_HEADER)?;
    for c in ds.records() {
        w.write_record([
            c.user_id.to_string(),
            c.location_id.to_string(),
            c.lat.to_string(),
            c.lon.to_string(),
            c.local_time.format("%Y-%m-%dT%H:%M:%S").to_string(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn load_movielens(path: impl AsRef<Path>) -> Result<RatingDataset> {
    read_movielens(open(path.as_ref())?)
}

/// Parses the `::`-delimited MovieLens 1M ratings format.
pub fn read_movielens<R: Read>(reader: R) -> Result<RatingDataset> {
    let mut records = Vec::new();
    for (n, line) in BufReader::new(reader).lines().enumerate() {
        let lineno = n as u64 + 1;
        let line = line.map_err(|e| parse_err(lineno, e.to_string()))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split("::").collect();
        if parts.len() != 4 {
            return Err(parse_err(
                lineno,
                format!("expected 4 `::`-separated fields, found {}", parts.len()),
            ));
        }
        let stars: u8 = parse_num(parts[2], "rating", lineno)?;
        if !(1..=5).contains(&stars) {
            return Err(parse_err(lineno, format!("rating {stars} outside [1, 5]")));
        }
        records.push(Rating {
            user_id: parse_num(parts[0], "user id", lineno)?,
            item_id: parse_num(parts[1], "movie id", lineno)?,
            value: f64::from(stars),
            timestamp: parse_num(parts[3], "timestamp", lineno)?,
        });
    }
    Ok(RatingDataset::new(records))
}

pub fn load_ratings_csv(path: impl AsRef<Path>) -> Result<RatingDataset> {
    read_ratings_csv(open(path.as_ref())?)
}

pub fn read_ratings_csv<R: Read>(reader: R) -> Result<RatingDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut rows = rdr.records();
    match rows.next() {
        None => return Ok(RatingDataset::default()),
        Some(header) => check_header(&header?, &RATING_HEADER)?,
    }
    let mut records = Vec::new();
    for row in rows {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() != RATING_HEADER.len() {
            return Err(parse_err(
                line,
                format!("expected 4 columns, found {}", row.len()),
            ));
        }
        let value: f64 = parse_num(field(&row, 2, "value", line)?, "value", line)?;
        if !value.is_finite() {
            return Err(parse_err(line, "non-finite rating value"));
        }
        records.push(Rating {
            user_id: parse_num(field(&row, 0, "user_id", line)?, "user_id", line)?,
            item_id: parse_num(field(&row, 1, "item_id", line)?, "item_id", line)?,
            value,
            timestamp: parse_num(field(&row, 3, "timestamp", line)?, "timestamp", line)?,
        });
    }
    Ok(RatingDataset::new(records))
}

pub fn write_ratings_csv<W: Write>(ds: &RatingDataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(RATING_HEADER)?;
    for r in ds.records() {
        w.write_record([
            r.user_id.to_string(),
            r.item_id.to_string(),
            r.value.to_string(),
            r.timestamp.to_string(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
