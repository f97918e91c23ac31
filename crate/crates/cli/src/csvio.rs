//! Trajectory log serialization.
//!
//! Columns, in order: `t, x1..x3, y1..y3, e_norm, u1..u3, theta_hat_1..p,
//! theta_true_1..p, F_norm, J, pe`. Every value is written with 17
//! significant digits in scientific notation, which round-trips `f64`
//! exactly and is locale-independent.

use std::io::{self, Write};
use std::path::Path;

use rhc_core::sim::TrajectoryLog;

pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_csv<W: Write>(mut w: W, log: &TrajectoryLog) -> io::Result<()> {
    let p = log.rows.first().map_or(0, |r| r.theta_hat.len());
    let mut header = String::from("t,x1,x2,x3,y1,y2,y3,e_norm,u1,u2,u3");
    for i in 1..=p {
        header.push_str(&format!(",theta_hat_{i}"));
    }
    for i in 1..=p {
        header.push_str(&format!(",theta_true_{i}"));
    }
    header.push_str(",F_norm,J,pe");
    writeln!(w, "{header}")?;

    let mut fields: Vec<String> = Vec::with_capacity(14 + 2 * p);
    for row in &log.rows {
        fields.clear();
        fields.push(format_float(row.t));
        fields.extend(row.x.iter().map(|&v| format_float(v)));
        fields.extend(row.y.iter().map(|&v| format_float(v)));
        fields.push(format_float(row.e_norm));
        fields.extend(row.u.iter().map(|&v| format_float(v)));
        fields.extend(row.theta_hat.iter().map(|&v| format_float(v)));
        fields.extend(row.theta_true.iter().map(|&v| format_float(v)));
        fields.push(format_float(row.f_norm));
        fields.push(format_float(row.cost));
        fields.push(format_float(row.pe));
        writeln!(w, "{}", fields.join(","))?;
    }
    Ok(())
}

pub fn write_csv_file(path: &Path, log: &TrajectoryLog) -> io::Result<()> {
    let file = std::fs::File::create(path)?;
    let mut buf = io::BufWriter::new(file);
    write_csv(&mut buf, log)?;
    buf.flush()
}
