//! CSV, JSON and SVG emission for SSF grids and verification reports.

use serde_json::{json, Map, Value};
use ssf_core::verify::{SuiteStatus, VerifyReport};

/// Shortest decimal with at most 12 significant digits.
pub fn fmt12(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        let fixed = format!("{x:.decimals$}");
        trim_zeros(&fixed)
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

/// `x` rounded to what [`fmt12`] prints.
pub fn round12(x: f64) -> f64 {
    fmt12(x).parse().unwrap_or(x)
}

/// Named columns of equal length, first column λ.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub names: Vec<&'static str>,
    pub columns: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(lambda: &[f64], xi: &[f64]) -> Self {
        Self { names: vec!["lambda", "xi"], columns: vec![lambda.to_vec(), xi.to_vec()] }
    }

    /// Appends `xi_oracle` and `abs_err`.
    pub fn with_oracle(mut self, oracle: Vec<f64>) -> Self {
        let err = self.columns[1].iter().zip(&oracle).map(|(x, o)| (x - o).abs()).collect();
        self.names.extend(["xi_oracle", "abs_err"]);
        self.columns.push(oracle);
        self.columns.push(err);
        self
    }

    pub fn rows(&self) -> usize {
        self.columns[0].len()
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.names.join(",");
        out.push('\n');
        for r in 0..self.rows() {
            let row: Vec<String> = self.columns.iter().map(|col| fmt12(col[r])).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self, metadata: Value) -> String {
        let mut columns = Map::new();
        for (name, col) in self.names.iter().zip(&self.columns) {
            columns.insert(name.to_string(), col.iter().map(|&x| json_number(x)).collect());
        }
        let doc = json!({ "columns": Value::Object(columns), "metadata": metadata });
        let mut text = serde_json::to_string_pretty(&doc).expect("serializable");
        text.push('\n');
        text
    }
}

fn json_number(x: f64) -> Value {
    serde_json::Number::from_f64(round12(x)).map_or(Value::Null, Value::Number)
}

pub fn report_json(report: &VerifyReport, metadata: Value) -> String {
    let suites: Vec<Value> = report
        .suites
        .iter()
        .map(|s| {
            let (status, note) = status_text(&s.status);
            json!({
                "name": s.name,
                "status": status,
                "note": note,
                "max_residual": s.max_residual.map(json_number),
                "tolerance": s.tolerance,
                "detail": s.detail,
            })
        })
        .collect();
    let doc = json!({ "passed": report.passed(), "suites": suites, "metadata": metadata });
    let mut text = serde_json::to_string_pretty(&doc).expect("serializable");
    text.push('\n');
    text
}

pub fn report_csv(report: &VerifyReport) -> String {
    let mut out = String::from("suite,status,max_residual,tolerance,detail\n");
    for s in &report.suites {
        let (status, note) = status_text(&s.status);
        let detail = s.detail.clone().or(note).unwrap_or_default().replace(['"', ','], ";");
        let residual = s.max_residual.map(fmt12).unwrap_or_default();
        out.push_str(&format!("{},{status},{residual},{},{detail}\n", s.name, fmt12(s.tolerance)));
    }
    out
}

fn status_text(status: &SuiteStatus) -> (&'static str, Option<String>) {
    match status {
        SuiteStatus::Pass => ("pass", None),
        SuiteStatus::Fail => ("fail", None),
        SuiteStatus::Skipped(why) => ("skipped", Some(why.clone())),
    }
}

/// Standalone SVG of ξ against λ, drawn as a step function.
pub fn svg_plot(lambda: &[f64], xi: &[f64], title: &str) -> String {
    const W: f64 = 720.0;
    const H: f64 = 420.0;
    const PAD: f64 = 56.0;
    let (x0, x1) = (lambda[0], lambda[lambda.len() - 1]);
    let (mut y0, mut y1) = xi.iter().fold((0.0f64, 0.0f64), |(lo, hi), &y| (lo.min(y), hi.max(y)));
    if y1 - y0 < 1e-9 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let margin = 0.05 * (y1 - y0);
    let (y0, y1) = (y0 - margin, y1 + margin);
    let px = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let py = |y: f64| H - PAD - (y - y0) / (y1 - y0) * (H - 2.0 * PAD);

    let mut path = format!("M{:.2},{:.2}", px(lambda[0]), py(xi[0]));
    for k in 1..lambda.len() {
        // hold the previous value up to the midpoint, then step
        let mid = 0.5 * (lambda[k - 1] + lambda[k]);
        path.push_str(&format!(" H{:.2} V{:.2}", px(mid), py(xi[k])));
    }
    path.push_str(&format!(" H{:.2}", px(lambda[lambda.len() - 1])));

    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"15\" text-anchor=\"middle\">{}</text>\n",
        W / 2.0,
        escape(title)
    );
    let axis = "stroke=\"black\" stroke-width=\"1\"";
    svg.push_str(&format!(
        "<line x1=\"{PAD}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" {axis}/>\n<line x1=\"{PAD}\" y1=\"{PAD}\" x2=\"{PAD}\" y2=\"{b}\" {axis}/>\n",
        b = H - PAD,
        r = W - PAD
    ));
    for k in 0..=5 {
        let t = k as f64 / 5.0;
        let (xv, yv) = (x0 + t * (x1 - x0), y0 + t * (y1 - y0));
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{}</text>\n",
            px(xv),
            H - PAD + 16.0,
            fmt_tick(xv)
        ));
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{}</text>\n",
            PAD - 6.0,
            py(yv) + 4.0,
            fmt_tick(yv)
        ));
    }
    if y0 < 0.0 && y1 > 0.0 {
        svg.push_str(&format!(
            "<line x1=\"{PAD}\" y1=\"{z:.2}\" x2=\"{r}\" y2=\"{z:.2}\" stroke=\"#bbb\" stroke-dasharray=\"4 3\"/>\n",
            z = py(0.0),
            r = W - PAD
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">λ</text>\n\
         <text x=\"16\" y=\"{}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">ξ</text>\n",
        W / 2.0,
        H - 12.0,
        H / 2.0
    ));
    svg.push_str(&format!("<path d=\"{path}\" fill=\"none\" stroke=\"#1f5fa8\" stroke-width=\"1.5\"/>\n</svg>\n"));
    svg
}

fn fmt_tick(x: f64) -> String {
    let s = trim_zeros(&format!("{x:.3}"));
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_digits() {
        assert_eq!(fmt12(1.0), "1");
        assert_eq!(fmt12(-0.0), "0");
        assert_eq!(fmt12(0.1 + 0.2), "0.3");
        assert_eq!(fmt12(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt12(-2.5e-9), "-2.5e-9");
        assert_eq!(fmt12(123456789012345.0), "1.23456789012e14");
        assert_eq!(fmt12(0.99999999999999), "1");
    }

    #[test]
    fn csv_round_trip() {
        let lambda = [-1.0, 0.015, 1.0 / 7.0];
        let xi = [1e-14, std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::PI];
        let csv = Table::new(&lambda, &xi).to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("lambda,xi"));
        for (line, (l, x)) in lines.zip(lambda.iter().zip(&xi)) {
            let vals: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
            assert_eq!(vals[0], round12(*l));
            assert_eq!(vals[1], round12(*x));
            assert!((vals[1] - x).abs() <= 1e-12 * x.abs().max(1e-300) * 10.0);
            assert_eq!(fmt12(vals[1]), fmt12(*x));
        }
    }

    #[test]
    fn oracle_columns() {
        let t = Table::new(&[0.0, 1.0], &[0.5, 0.25]).with_oracle(vec![0.5, 0.0]);
        assert_eq!(t.to_csv(), "lambda,xi,xi_oracle,abs_err\n0,0.5,0.5,0\n1,0.25,0,0.25\n");
    }

    #[test]
    fn json_mirrors_columns() {
        let t = Table::new(&[0.0, 1.0], &[0.5, 0.25]);
        let doc: Value = serde_json::from_str(&t.to_json(json!({"kind": "delta"}))).unwrap();
        assert_eq!(doc["columns"]["xi"], json!([0.5, 0.25]));
        assert_eq!(doc["metadata"]["kind"], "delta");
    }

    #[test]
    fn svg_is_standalone_steps() {
        let svg = svg_plot(&[0.0, 1.0, 2.0], &[0.0, 1.0, 0.0], "a < b");
        assert!(svg.starts_with("<svg xmlns=\"http://www.w3.org/2000/svg\""));
        assert!(svg.contains(" V") && svg.contains(" H"));
        assert!(svg.contains("a &lt; b"));
        assert!(svg.trim_end().ends_with("</svg>"));
    }
}
