//! Test scorer speaking the external-scorer wire protocol: one JSON request
//! per line on stdin, one `{"score":s}` reply per line on stdout.
//!
//! Modes:
//!   mean            score = mean of the patch values under the polyline
//!   constant <s>    always reply with the given score
//!   malformed       reply with a line that is not valid JSON
//!   exit            read one request, then exit without replying

use std::io::{BufRead, Write};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mode = args.first().map(String::as_str).unwrap_or("mean");
    let stdin = std::io::stdin();
    let mut stdout = std::io::stdout();
    for line in stdin.lock().lines() {
        let line = match line {
            Ok(l) => l,
            Err(_) => break,
        };
        if line.trim().is_empty() {
            continue;
        }
        match mode {
            "constant" => {
                let s: f64 = args.get(1).and_then(|v| v.parse().ok()).unwrap_or(0.5);
                writeln!(stdout, "{{\"score\":{s}}}").unwrap();
            }
            "malformed" => {
                writeln!(stdout, "this is not json").unwrap();
            }
            "exit" => return,
            _ => {
                let req: serde_json::Value = serde_json::from_str(&line).expect("request JSON");
                let width = req["width"].as_u64().unwrap() as i64;
                let values = req["values"].as_array().unwrap();
                let polyline = req["polyline"].as_array().unwrap();
                let mut sum = 0.0;
                for p in polyline {
                    let x = p[0].as_i64().unwrap();
                    let y = p[1].as_i64().unwrap();
                    sum += values[(y * width + x) as usize].as_f64().unwrap();
                }
                let score = if polyline.is_empty() { 0.0 } else { sum / polyline.len() as f64 };
                writeln!(stdout, "{{\"score\":{score}}}").unwrap();
            }
        }
        stdout.flush().unwrap();
    }
}
