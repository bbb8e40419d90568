//! Hand-off to an external MIP solver over MPS and solution files.
//!
//! The external command is given two paths through `{mps}` and `{sol}`
//! placeholders; whatever it writes back is trusted for nothing — the point
//! is re-checked against the model and the objective recomputed from the IR.

use std::path::Path;
use std::process::Command;

use thiserror::Error;

use crate::milp::{check_solution_feasibility, MipModel};
use crate::solve::mps::{write_mps, MpsError};
use crate::solve::{ModelShape, Provenance, Solution, SolveStatus};

#[derive(Debug, Error)]
pub enum ExternalError {
    #[error("cannot {action} {path}: {source}")]
    Io {
        action: &'static str,
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("command template must contain both {{mps}} and {{sol}} placeholders")]
    BadTemplate,
    #[error("external solver failed ({status}): {stderr}")]
    CommandFailed { status: String, stderr: String },
    #[error("solution file line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("solution file names unknown variable '{0}'")]
    UnknownVariable(String),
    #[error("returned point violates the model: {first} ({others} further violations)")]
    InfeasiblePoint { first: String, others: usize },
    #[error(transparent)]
    Mps(#[from] MpsError),
}

/// Reads a solution file ("name value" lines, `#` comments, unlisted
/// variables 0) and validates it against `model`.
///
/// The returned [`Solution`] carries provenance [`Provenance::External`]
/// and an objective recomputed from the model, never taken from the file.
pub fn read_solution_file(model: &MipModel, path: &Path) -> Result<Solution, ExternalError> {
    let text = std::fs::read_to_string(path).map_err(|source| ExternalError::Io {
        action: "read",
        path: path.display().to_string(),
        source,
    })?;
    let mut point = vec![0.0; model.variables().len()];
    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let fields: Vec<&str> = content.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(ExternalError::Parse {
                line,
                msg: format!("expected 'name value', got {} fields", fields.len()),
            });
        }
        let v = model
            .var_index(fields[0])
            .ok_or_else(|| ExternalError::UnknownVariable(fields[0].to_string()))?;
        let value: f64 = fields[1]
            .parse()
            .map_err(|_| ExternalError::Parse { line, msg: format!("bad number '{}'", fields[1]) })?;
        if !value.is_finite() {
            return Err(ExternalError::Parse { line, msg: format!("non-finite value '{}'", fields[1]) });
        }
        point[v] = value;
    }

    let violations = check_solution_feasibility(model, &point);
    if let Some(first) = violations.first() {
        return Err(ExternalError::InfeasiblePoint {
            first: first.to_string(),
            others: violations.len() - 1,
        });
    }
    let shape = ModelShape::of(model);
    Ok(Solution {
        status: SolveStatus::Optimal,
        provenance: Provenance::External,
        best: Some(shape.solution_point(model, &point)),
    })
}

/// Exports `model` to MPS inside `workdir`, runs `command_template` with
/// `{mps}`/`{sol}` substituted, and reads back the solution file.
pub fn solve_via_external(
    model: &MipModel,
    command_template: &str,
    workdir: &Path,
) -> Result<Solution, ExternalError> {
    if !command_template.contains("{mps}") || !command_template.contains("{sol}") {
        return Err(ExternalError::BadTemplate);
    }
    std::fs::create_dir_all(workdir).map_err(|source| ExternalError::Io {
        action: "create",
        path: workdir.display().to_string(),
        source,
    })?;
    let mps_path = workdir.join("model.mps");
    let sol_path = workdir.join("model.sol");
    write_mps(model, &mps_path)?;

    let command = command_template
        .replace("{mps}", &mps_path.display().to_string())
        .replace("{sol}", &sol_path.display().to_string());
    let output = Command::new("sh")
        .arg("-c")
        .arg(&command)
        .current_dir(workdir)
        .output()
        .map_err(|source| ExternalError::Io {
            action: "run",
            path: command.clone(),
            source,
        })?;
    if !output.status.success() {
        return Err(ExternalError::CommandFailed {
            status: output
                .status
                .code()
                .map_or_else(|| "killed by signal".to_string(), |c| format!("exit code {c}")),
            stderr: String::from_utf8_lossy(&output.stderr).trim().to_string(),
        });
    }
    read_solution_file(model, &sol_path)
}
