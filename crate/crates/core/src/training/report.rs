use std::fmt::Write;

pub const CSV_HEADER: &str = "step,loss,psnr_1x,psnr_2x,wall_ms";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportRow {
    pub step: usize,
    /// Mean per-sample loss of that step's minibatch.
    pub loss: f64,
    /// Mean PSNR over the trained signals; NaN when not applicable.
    pub psnr_1x: f64,
    pub psnr_2x: f64,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainReport {
    pub rows: Vec<ReportRow>,
    /// Minibatch loss of every step.
    pub losses: Vec<f64>,
}

impl TrainReport {
    pub fn last(&self) -> Option<&ReportRow> {
        self.rows.last()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{}",
                r.step,
                fmt_metric(r.loss),
                fmt_metric(r.psnr_1x),
                fmt_metric(r.psnr_2x),
                r.wall_ms
            )
            .expect("write to string");
        }
        out
    }
}

/// Shortest round-trip decimal; `inf` and `nan` spelled out.
pub fn fmt_metric(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v}")
    }
}
