pub mod audit;
pub mod certify;
pub mod danskin;
pub mod eig;
pub mod evt;
pub mod ode;
pub mod selector;
pub mod shh;

/// `{:?}` keeps the shortest round-trip representation of each float.
pub(crate) fn csv_line(values: &[f64]) -> String {
    let cells: Vec<String> = values.iter().map(|v| format!("{v:?}")).collect();
    cells.join(",") + "\n"
}
