//! Free-format MPS export and import.
//!
//! The writer emits one coefficient per line with 17-significant-digit
//! scientific values, so every finite `f64` round-trips bit-exactly:
//! `parse_mps_str(&mps_string(&m))` reconstructs a model equal to `m`.
//! Binary columns travel inside `'MARKER'` `'INTORG'`/`'INTEND'` fences with
//! explicit bounds; a variable that appears in no constraint and has no
//! objective coefficient still gets a zero entry against the objective row,
//! because MPS has no other way to declare a column.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::milp::{MipModel, Sense, VarKind};

#[derive(Debug, Error)]
pub enum MpsError {
    #[error("cannot {action} {path}: {source}")]
    Io {
        action: &'static str,
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("MPS line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unsupported MPS feature: {0}")]
    Unsupported(String),
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// Renders the model as free-format MPS text.
pub fn mps_string(model: &MipModel) -> String {
    let mut out = String::new();
    let name: String = model
        .name
        .chars()
        .map(|c| if c.is_whitespace() { '_' } else { c })
        .collect();
    let _ = writeln!(out, "NAME {name}");

    out.push_str("ROWS\n");
    out.push_str(" N OBJ\n");
    for c in model.constraints() {
        let tag = match c.sense {
            Sense::Le => 'L',
            Sense::Eq => 'E',
            Sense::Ge => 'G',
        };
        let _ = writeln!(out, " {tag} {}", c.name);
    }

    // Rows touching each variable, in constraint order.
    let mut rows_of = vec![Vec::new(); model.variables().len()];
    for c in model.constraints() {
        for &(v, coeff) in &c.terms {
            rows_of[v].push((c.name.as_str(), coeff));
        }
    }

    out.push_str("COLUMNS\n");
    let mut in_integer_block = false;
    let mut marker_seq = 0usize;
    for (v, var) in model.variables().iter().enumerate() {
        let wants_integer = var.kind == VarKind::Binary;
        if wants_integer != in_integer_block {
            let fence = if wants_integer { "INTORG" } else { "INTEND" };
            let _ = writeln!(out, " MARKER{marker_seq} 'MARKER' '{fence}'");
            marker_seq += 1;
            in_integer_block = wants_integer;
        }
        let obj = model.objective_coefficients()[v];
        let mut wrote_any = false;
        if obj != 0.0 {
            let _ = writeln!(out, " {} OBJ {}", var.name, num(obj));
            wrote_any = true;
        }
        for &(row, coeff) in &rows_of[v] {
            let _ = writeln!(out, " {} {} {}", var.name, row, num(coeff));
            wrote_any = true;
        }
        if !wrote_any {
            // Anchor entry: declares the column even though it is unused.
            let _ = writeln!(out, " {} OBJ {}", var.name, num(0.0));
        }
    }
    if in_integer_block {
        let _ = writeln!(out, " MARKER{marker_seq} 'MARKER' 'INTEND'");
    }

    out.push_str("RHS\n");
    if model.objective_constant() != 0.0 {
        let _ = writeln!(out, " RHS OBJ {}", num(-model.objective_constant()));
    }
    for c in model.constraints() {
        if c.rhs != 0.0 {
            let _ = writeln!(out, " RHS {} {}", c.name, num(c.rhs));
        }
    }

    out.push_str("BOUNDS\n");
    for var in model.variables() {
        match var.kind {
            VarKind::Binary => {
                if var.lower == var.upper {
                    let _ = writeln!(out, " FX BND {} {}", var.name, num(var.lower));
                } else {
                    let _ = writeln!(out, " UP BND {} {}", var.name, num(1.0));
                }
            }
            VarKind::Continuous => {
                if var.lower == var.upper {
                    let _ = writeln!(out, " FX BND {} {}", var.name, num(var.lower));
                } else if var.lower == f64::NEG_INFINITY && var.upper == f64::INFINITY {
                    let _ = writeln!(out, " FR BND {}", var.name);
                } else {
                    if var.lower == f64::NEG_INFINITY {
                        let _ = writeln!(out, " MI BND {}", var.name);
                    } else if var.lower != 0.0 {
                        let _ = writeln!(out, " LO BND {} {}", var.name, num(var.lower));
                    }
                    if var.upper != f64::INFINITY {
                        let _ = writeln!(out, " UP BND {} {}", var.name, num(var.upper));
                    }
                }
            }
        }
    }
    out.push_str("ENDATA\n");
    out
}

/// Writes [`mps_string`] to a file.
pub fn write_mps(model: &MipModel, path: &Path) -> Result<(), MpsError> {
    std::fs::write(path, mps_string(model)).map_err(|source| MpsError::Io {
        action: "write",
        path: path.display().to_string(),
        source,
    })
}

/// Reads a free-format MPS file.
pub fn parse_mps(path: &Path) -> Result<MipModel, MpsError> {
    let text = std::fs::read_to_string(path).map_err(|source| MpsError::Io {
        action: "read",
        path: path.display().to_string(),
        source,
    })?;
    parse_mps_str(&text)
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    Start,
    Rows,
    Columns,
    Rhs,
    Bounds,
    Done,
}

struct PendingVar {
    name: String,
    integer: bool,
    lower: Option<f64>,
    upper: Option<f64>,
    objective: f64,
}

/// Parses free-format MPS text into a model.
///
/// Supports the subset the writer produces (plus `PL`/`BV` bounds): one `N`
/// row, `L`/`G`/`E` rows, integer markers, `RHS`, and `BOUNDS`. `RANGES`,
/// multiple objective rows, and general-integer columns are rejected rather
/// than misread.
pub fn parse_mps_str(text: &str) -> Result<MipModel, MpsError> {
    let parse_err = |line: usize, msg: String| MpsError::Parse { line, msg };
    let number = |line: usize, token: &str| -> Result<f64, MpsError> {
        let v: f64 = token
            .parse()
            .map_err(|_| parse_err(line, format!("bad number '{token}'")))?;
        if !v.is_finite() {
            // Infinite bounds travel as MI/PL/FR, never as numeric tokens.
            return Err(parse_err(line, format!("non-finite number '{token}'")));
        }
        Ok(v)
    };

    let mut section = Section::Start;
    let mut model_name = String::new();
    let mut obj_row: Option<String> = None;
    let mut row_names: Vec<String> = Vec::new();
    let mut row_senses: Vec<Sense> = Vec::new();
    let mut row_terms: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut row_rhs: Vec<f64> = Vec::new();
    let mut row_index: HashMap<String, usize> = HashMap::new();
    let mut vars: Vec<PendingVar> = Vec::new();
    let mut var_index: HashMap<String, usize> = HashMap::new();
    let mut objective_constant = 0.0f64;
    let mut in_integer_block = false;

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        if raw.trim().is_empty() || raw.starts_with('*') {
            continue;
        }
        let is_header = !raw.starts_with(|c: char| c.is_whitespace());
        let fields: Vec<&str> = raw.split_whitespace().collect();

        if is_header {
            section = match fields[0] {
                "NAME" => {
                    model_name = fields.get(1).unwrap_or(&"").to_string();
                    Section::Start
                }
                "ROWS" => Section::Rows,
                "COLUMNS" => Section::Columns,
                "RHS" => Section::Rhs,
                "BOUNDS" => Section::Bounds,
                "ENDATA" => Section::Done,
                other => return Err(MpsError::Unsupported(format!("section {other}"))),
            };
            if section == Section::Done {
                break;
            }
            continue;
        }

        match section {
            Section::Start | Section::Done => {
                return Err(parse_err(line, "data before any section".into()));
            }
            Section::Rows => {
                if fields.len() != 2 {
                    return Err(parse_err(line, "expected '<type> <row>'".into()));
                }
                let (tag, name) = (fields[0], fields[1]);
                let sense = match tag {
                    "N" => {
                        if obj_row.is_some() {
                            return Err(MpsError::Unsupported("multiple objective rows".into()));
                        }
                        obj_row = Some(name.to_string());
                        continue;
                    }
                    "L" => Sense::Le,
                    "E" => Sense::Eq,
                    "G" => Sense::Ge,
                    other => return Err(parse_err(line, format!("unknown row type '{other}'"))),
                };
                if row_index.insert(name.to_string(), row_names.len()).is_some() {
                    return Err(parse_err(line, format!("duplicate row '{name}'")));
                }
                row_names.push(name.to_string());
                row_senses.push(sense);
                row_terms.push(Vec::new());
                row_rhs.push(0.0);
            }
            Section::Columns => {
                if fields.iter().any(|f| *f == "'MARKER'") {
                    if fields.iter().any(|f| *f == "'INTORG'") {
                        in_integer_block = true;
                    } else if fields.iter().any(|f| *f == "'INTEND'") {
                        in_integer_block = false;
                    } else {
                        return Err(parse_err(line, "marker without INTORG/INTEND".into()));
                    }
                    continue;
                }
                if fields.len() < 3 || fields.len() % 2 == 0 {
                    return Err(parse_err(line, "expected '<var> <row> <value>'...".into()));
                }
                let var_name = fields[0];
                let v = *var_index.entry(var_name.to_string()).or_insert_with(|| {
                    vars.push(PendingVar {
                        name: var_name.to_string(),
                        integer: in_integer_block,
                        lower: None,
                        upper: None,
                        objective: 0.0,
                    });
                    vars.len() - 1
                });
                for pair in fields[1..].chunks(2) {
                    let (row, value) = (pair[0], number(line, pair[1])?);
                    if obj_row.as_deref() == Some(row) {
                        vars[v].objective += value;
                    } else if let Some(&r) = row_index.get(row) {
                        if row_terms[r].iter().any(|&(existing, _)| existing == v) {
                            return Err(parse_err(
                                line,
                                format!("duplicate entry for '{var_name}' in row '{row}'"),
                            ));
                        }
                        if value != 0.0 {
                            row_terms[r].push((v, value));
                        }
                    } else {
                        return Err(parse_err(line, format!("unknown row '{row}'")));
                    }
                }
            }
            Section::Rhs => {
                // First field is the RHS set name unless the pair count
                // says otherwise.
                let data = if fields.len() % 2 == 1 { &fields[1..] } else { &fields[..] };
                for pair in data.chunks(2) {
                    let (row, value) = (pair[0], number(line, pair[1])?);
                    if obj_row.as_deref() == Some(row) {
                        objective_constant = -value;
                    } else if let Some(&r) = row_index.get(row) {
                        row_rhs[r] = value;
                    } else {
                        return Err(parse_err(line, format!("unknown row '{row}'")));
                    }
                }
            }
            Section::Bounds => {
                let kind = fields[0];
                let takes_value = matches!(kind, "UP" | "LO" | "FX");
                let expected = if takes_value { 4 } else { 3 };
                // Tolerate a missing bound-set name.
                let short = fields.len() == expected - 1;
                if fields.len() != expected && !short {
                    return Err(parse_err(line, format!("malformed {kind} bound")));
                }
                let var_name = if short { fields[1] } else { fields[2] };
                let v = *var_index
                    .get(var_name)
                    .ok_or_else(|| parse_err(line, format!("unknown column '{var_name}'")))?;
                match kind {
                    "UP" => vars[v].upper = Some(number(line, fields[expected - 1 - usize::from(short)])?),
                    "LO" => vars[v].lower = Some(number(line, fields[expected - 1 - usize::from(short)])?),
                    "FX" => {
                        let value = number(line, fields[expected - 1 - usize::from(short)])?;
                        vars[v].lower = Some(value);
                        vars[v].upper = Some(value);
                    }
                    "FR" => {
                        vars[v].lower = Some(f64::NEG_INFINITY);
                        vars[v].upper = Some(f64::INFINITY);
                    }
                    "MI" => vars[v].lower = Some(f64::NEG_INFINITY),
                    "PL" => vars[v].upper = Some(f64::INFINITY),
                    "BV" => {
                        vars[v].integer = true;
                        vars[v].lower = Some(0.0);
                        vars[v].upper = Some(1.0);
                    }
                    other => {
                        return Err(MpsError::Unsupported(format!("bound type {other}")));
                    }
                }
            }
        }
    }

    if obj_row.is_none() {
        return Err(MpsError::Unsupported("model without an objective row".into()));
    }

    let mut model = MipModel::new(model_name);
    for pending in &vars {
        let (default_lower, default_upper, kind) = if pending.integer {
            (0.0, 1.0, VarKind::Binary)
        } else {
            (0.0, f64::INFINITY, VarKind::Continuous)
        };
        let lower = pending.lower.unwrap_or(default_lower);
        let upper = pending.upper.unwrap_or(default_upper);
        if pending.integer && (!matches!(lower, 0.0 | 1.0) || !matches!(upper, 0.0 | 1.0)) {
            return Err(MpsError::Unsupported(format!(
                "general integer column '{}' (bounds {lower}..{upper})",
                pending.name
            )));
        }
        if lower > upper {
            return Err(MpsError::Parse {
                line: 0,
                msg: format!("column '{}' has empty bounds {lower}..{upper}", pending.name),
            });
        }
        model.add_variable(&pending.name, kind, lower, upper);
    }
    for r in 0..row_names.len() {
        model.add_constraint(&row_names[r], row_terms[r].clone(), row_senses[r], row_rhs[r]);
    }
    for (v, pending) in vars.iter().enumerate() {
        if pending.objective != 0.0 {
            model.set_objective_coefficient(v, pending.objective);
        }
    }
    model.set_objective_constant(objective_constant);
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::tiny1;
    use crate::instance::ObjectiveKind;
    use crate::milp::build_model;
    use proptest::prelude::*;

    #[test]
    fn tiny_models_round_trip_exactly() {
        let (inst, base) = tiny1();
        for capacitated in [true, false] {
            for objective in [ObjectiveKind::MinMax, ObjectiveKind::MinAll] {
                let cfg = base.with_capacitated(capacitated).with_objective(objective);
                let model = build_model(&inst, &cfg);
                let text = mps_string(&model);
                let back = parse_mps_str(&text).unwrap();
                assert_eq!(model, back, "cap={capacitated} obj={objective:?}");
            }
        }
    }

    #[test]
    fn writer_is_deterministic() {
        let (inst, cfg) = tiny1();
        assert_eq!(mps_string(&build_model(&inst, &cfg)), mps_string(&build_model(&inst, &cfg)));
    }

    #[test]
    fn awkward_shapes_round_trip() {
        let mut model = MipModel::new("odd-shapes");
        let orphan = model.add_continuous("orphan", 0.0, f64::INFINITY);
        let free = model.add_continuous("free", f64::NEG_INFINITY, f64::INFINITY);
        let shifted = model.add_continuous("shifted", -2.5, 7.0);
        let capped = model.add_continuous("capped", f64::NEG_INFINITY, 3.0);
        let pinned = model.add_variable("pinned", VarKind::Binary, 1.0, 1.0);
        model.add_constraint("empty", vec![], Sense::Le, 4.0);
        model.add_constraint(
            "mix",
            vec![(free, -1.5), (shifted, 2.0), (pinned, 1.0)],
            Sense::Ge,
            -3.25,
        );
        model.set_objective_coefficient(capped, -1.0);
        model.set_objective_constant(12.75);
        let _ = orphan;

        let back = parse_mps_str(&mps_string(&model)).unwrap();
        assert_eq!(model, back);
    }

    #[test]
    fn whitespace_in_model_names_is_sanitized() {
        // NAME is a single whitespace-delimited token in MPS.
        let model = MipModel::new("odd shapes");
        let text = mps_string(&model);
        assert!(text.starts_with("NAME odd_shapes\n"));
        assert_eq!(parse_mps_str(&text).unwrap().name, "odd_shapes");
    }

    #[test]
    fn ranges_and_general_integers_are_rejected() {
        let with_ranges = "NAME t\nROWS\n N OBJ\n L c\nCOLUMNS\n x c 1e0\nRANGES\n R c 1e0\nENDATA\n";
        assert!(matches!(parse_mps_str(with_ranges), Err(MpsError::Unsupported(_))));

        let general_int = "NAME t\nROWS\n N OBJ\n L c\nCOLUMNS\n M 'MARKER' 'INTORG'\n x c 1e0\n M 'MARKER' 'INTEND'\nBOUNDS\n UP BND x 5e0\nENDATA\n";
        assert!(matches!(parse_mps_str(general_int), Err(MpsError::Unsupported(_))));
    }

    #[test]
    fn malformed_inputs_name_the_line() {
        let bad_number = "NAME t\nROWS\n N OBJ\n L c\nCOLUMNS\n x c abc\nENDATA\n";
        match parse_mps_str(bad_number) {
            Err(MpsError::Parse { line, .. }) => assert_eq!(line, 6),
            other => panic!("expected parse error, got {other:?}"),
        }

        let unknown_row = "NAME t\nROWS\n N OBJ\n L c\nCOLUMNS\n x nope 1e0\nENDATA\n";
        assert!(matches!(parse_mps_str(unknown_row), Err(MpsError::Parse { .. })));

        let dup = "NAME t\nROWS\n N OBJ\n L c\nCOLUMNS\n x c 1e0 c 2e0\nENDATA\n";
        assert!(matches!(parse_mps_str(dup), Err(MpsError::Parse { .. })));

        let unknown_bound_var =
            "NAME t\nROWS\n N OBJ\n L c\nCOLUMNS\n x c 1e0\nBOUNDS\n UP BND nope 1e0\nENDATA\n";
        assert!(matches!(parse_mps_str(unknown_bound_var), Err(MpsError::Parse { .. })));
    }

    fn arb_bounds() -> impl Strategy<Value = (VarKind, f64, f64)> {
        prop_oneof![
            Just((VarKind::Binary, 0.0, 1.0)),
            Just((VarKind::Binary, 0.0, 0.0)),
            Just((VarKind::Binary, 1.0, 1.0)),
            Just((VarKind::Continuous, 0.0, f64::INFINITY)),
            (-10.0f64..10.0, 0.0f64..10.0)
                .prop_map(|(l, span)| (VarKind::Continuous, l, l + span)),
            Just((VarKind::Continuous, f64::NEG_INFINITY, f64::INFINITY)),
            (-10.0f64..10.0).prop_map(|u| (VarKind::Continuous, f64::NEG_INFINITY, u)),
            (-10.0f64..10.0).prop_map(|l| (VarKind::Continuous, l, f64::INFINITY)),
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn random_models_round_trip(
            bounds in proptest::collection::vec(arb_bounds(), 1..6),
            rows in proptest::collection::vec(
                (proptest::collection::vec(-3.0f64..3.0, 0..6), -5.0f64..5.0, 0usize..3),
                0..4,
            ),
            objective in proptest::collection::vec(-4.0f64..4.0, 0..6),
            constant in -8.0f64..8.0,
        ) {
            let mut model = MipModel::new("random");
            for (i, &(kind, lower, upper)) in bounds.iter().enumerate() {
                model.add_variable(format!("v{i}"), kind, lower, upper);
            }
            for (r, (coeffs, rhs, sense)) in rows.iter().enumerate() {
                let sense = [Sense::Le, Sense::Eq, Sense::Ge][*sense];
                let terms: Vec<(usize, f64)> = coeffs
                    .iter()
                    .enumerate()
                    .filter(|(v, _)| *v < bounds.len())
                    .map(|(v, &c)| (v, c))
                    .collect();
                model.add_constraint(format!("c{r}"), terms, sense, *rhs);
            }
            for (v, &c) in objective.iter().enumerate() {
                if v < bounds.len() {
                    model.set_objective_coefficient(v, c);
                }
            }
            model.set_objective_constant(constant);

            let back = parse_mps_str(&mps_string(&model)).unwrap();
            prop_assert_eq!(model, back);
        }
    }
}
