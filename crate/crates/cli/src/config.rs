//! Flat `key = value` run configuration.

use std::path::PathBuf;

use hodgefem::adaptivity::{Algorithm, MarkingParams};
use hodgefem::problems::PROBLEM_NAMES;

use crate::CliError;

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub problem: String,
    pub algorithm: Algorithm,
    pub params: MarkingParams,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub emit_svg: bool,
    pub timing: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            problem: "lshape-k2".into(),
            algorithm: Algorithm::Amfem2,
            params: MarkingParams::default(),
            seed: 1,
            output_dir: PathBuf::from("out"),
            emit_svg: false,
            timing: false,
        }
    }
}

fn parse_num<V: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<V, CliError> {
    v.parse()
        .map_err(|_| CliError::Config(format!("line {line}: invalid value '{v}' for {key}")))
}

fn parse_flag(line: usize, key: &str, v: &str) -> Result<bool, CliError> {
    match v {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(CliError::Config(format!(
            "line {line}: invalid flag '{v}' for {key}"
        ))),
    }
}

impl RunConfig {
    /// Parses `key = value` lines; `#` starts a comment. Unknown keys are rejected.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut c = RunConfig::default();
        let mut theta_set = false;
        for (i, raw) in text.lines().enumerate() {
            let n = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| CliError::Config(format!("line {n}: expected key = value")))?;
            let p = &mut c.params;
            match key {
                "problem" => {
                    if !PROBLEM_NAMES.contains(&value) {
                        return Err(CliError::Config(format!(
                            "line {n}: unknown problem '{value}'"
                        )));
                    }
                    c.problem = value.to_string();
                }
                "algorithm" => {
                    c.algorithm = value
                        .parse()
                        .map_err(|e| CliError::Config(format!("line {n}: {e}")))?
                }
                "theta" => {
                    p.theta = parse_num(n, key, value)?;
                    theta_set = true;
                }
                "theta_sigma" => p.theta_sigma = parse_num(n, key, value)?,
                "theta_p" => p.theta_p = parse_num(n, key, value)?,
                "theta_du" => p.theta_du = parse_num(n, key, value)?,
                "tol" => p.tol = parse_num(n, key, value)?,
                "rel_tol" => p.rel_tol = Some(parse_num(n, key, value)?),
                "max_steps" => p.max_steps = parse_num(n, key, value)?,
                "ndof_cap" => p.ndof_cap = parse_num(n, key, value)?,
                "seed" => c.seed = parse_num(n, key, value)?,
                "output_dir" => c.output_dir = PathBuf::from(value),
                "emit_svg" => c.emit_svg = parse_flag(n, key, value)?,
                "timing" => c.timing = parse_flag(n, key, value)?,
                other => return Err(CliError::Config(format!("line {n}: unknown key '{other}'"))),
            }
        }
        if theta_set && c.algorithm == Algorithm::Amfem2 {
            c.params.theta_sigma = c.params.theta;
        }
        c.params
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        Ok(c)
    }
}
