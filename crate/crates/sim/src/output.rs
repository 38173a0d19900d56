//! CSV writers. Floats use 17 significant digits so files round-trip and
//! compare byte for byte.

use std::io::Write;

use crate::trial::{RoundTrace, TrialTrace};

pub const TRACE_HEADER: [&str; 7] = [
    "round",
    "m_gap",
    "mse",
    "bound",
    "delay",
    "successes",
    "truncations",
];

pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "nan".to_string(), float)
}

fn trace_row(r: &RoundTrace, accuracy: bool) -> Vec<String> {
    let mut row = vec![
        r.round.to_string(),
        float(r.gap),
        float(r.mse),
        opt(r.bound),
        float(r.delay),
        r.successes.to_string(),
        r.truncations.to_string(),
    ];
    if accuracy {
        row.push(opt(r.accuracy));
    }
    row
}

/// Writes one trace. Logistic tasks get a trailing `accuracy` column.
pub fn write_trace<W: Write>(out: W, trace: &TrialTrace) -> csv::Result<()> {
    let accuracy = trace.rows.iter().any(|r| r.accuracy.is_some());
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = TRACE_HEADER.to_vec();
    if accuracy {
        header.push("accuracy");
    }
    w.write_record(&header)?;
    for r in &trace.rows {
        w.write_record(trace_row(r, accuracy))?;
    }
    w.flush()?;
    Ok(())
}

pub fn trace_to_string(trace: &TrialTrace) -> String {
    let mut buf = Vec::new();
    write_trace(&mut buf, trace).expect("writing to memory");
    String::from_utf8(buf).expect("CSV is UTF-8")
}
