//! JSON input documents.
//!
//! Euclidean points are arrays of numbers; circle points are angles in
//! radians. Every document carries `schema_version`.

use std::path::Path;

use serde::Deserialize;
use serde_json::Value;
use symprod_core::redistrict::RedistrictInput;
use symprod_core::{Angle, Configuration};

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpaceTag {
    Euclidean,
    Circle,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistanceInput {
    pub schema_version: u32,
    pub space: SpaceTag,
    pub a: Vec<Value>,
    pub b: Vec<Value>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BarycenterInput {
    pub schema_version: u32,
    pub space: SpaceTag,
    pub ensemble: Vec<Vec<Value>>,
    /// Starting configuration; when absent an element is drawn with `--seed`.
    #[serde(default)]
    pub start: Option<Vec<Value>>,
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Parse(format!("cannot read {}: {e}", path.display())))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn check_version(found: u32) -> CliResult<()> {
    if found != SCHEMA_VERSION {
        return Err(CliError::Parse(format!("schema_version {found} (expected {SCHEMA_VERSION})")));
    }
    Ok(())
}

fn euclidean_point(v: &Value) -> CliResult<Vec<f64>> {
    let arr = v.as_array().ok_or_else(|| CliError::Parse(format!("expected an array of numbers, found {v}")))?;
    arr.iter()
        .map(|x| x.as_f64().ok_or_else(|| CliError::Parse(format!("expected a number, found {x}"))))
        .collect()
}

fn angle(v: &Value) -> CliResult<Angle> {
    v.as_f64().map(Angle::new).ok_or_else(|| CliError::Parse(format!("expected an angle, found {v}")))
}

pub fn euclidean_config(values: &[Value]) -> CliResult<Configuration<Vec<f64>>> {
    Ok(Configuration::new(values.iter().map(euclidean_point).collect::<CliResult<Vec<_>>>()?)?)
}

pub fn circle_config(values: &[Value]) -> CliResult<Configuration<Angle>> {
    Ok(Configuration::new(values.iter().map(angle).collect::<CliResult<Vec<_>>>()?)?)
}

/// Common dimension of all Euclidean points, or a shape error.
pub fn common_dim<'a>(configs: impl IntoIterator<Item = &'a Configuration<Vec<f64>>>) -> CliResult<usize> {
    let mut dim = None;
    for c in configs {
        for p in c.iter() {
            match dim {
                None => dim = Some(p.len()),
                Some(d) if d != p.len() => {
                    return Err(CliError::Shape(format!("points of dimension {d} and {}", p.len())))
                }
                _ => {}
            }
        }
    }
    dim.ok_or_else(|| CliError::Parse("no points".into()))
}

pub fn read_redistrict(path: &Path) -> CliResult<(RedistrictInput, usize)> {
    let input: RedistrictInput = read_json(path)?;
    check_version(input.schema_version)?;
    let k = input.validate()?;
    Ok((input, k))
}
