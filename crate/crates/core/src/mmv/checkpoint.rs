//! `mmv-v1` text checkpoints.
//!
//! ```text
//! mmv-v1 <C> <K> <w_tw>
//! <C periods, space separated>
//! <input connectivity, run-length encoded over {E, I, N}, row-major>
//! <recurrent connectivity, same encoding>
//! <K readout weights of neuron 0>
//! ...                                   (C lines)
//! <K biases>
//! ```
//!
//! Runs are written as `<count><symbol>`, e.g. `12N1E3I`; an empty matrix is `-`.
//! Floats use Rust's shortest round-trip formatting, so write/read is bit-exact.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};

use thiserror::Error;

use super::{MmvError, MmvNetwork, Readout, Synapse, TernaryConnectivity};

pub const MAGIC: &str = "mmv-v1";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Network(#[from] MmvError),
}

fn encode_rle(syn: &[Synapse]) -> String {
    if syn.is_empty() {
        return "-".into();
    }
    let mut out = String::new();
    let mut iter = syn.iter().peekable();
    while let Some(&s) = iter.next() {
        let mut n = 1usize;
        while iter.peek() == Some(&&s) {
            iter.next();
            n += 1;
        }
        let _ = write!(out, "{n}{}", s.symbol());
    }
    out
}

fn decode_rle(text: &str, expected: usize, line: usize) -> Result<Vec<Synapse>, CheckpointError> {
    let err = |msg: String| CheckpointError::Parse { line, msg };
    let text = text.trim();
    if text == "-" {
        return if expected == 0 {
            Ok(Vec::new())
        } else {
            Err(err(format!(
                "empty connectivity, expected {expected} entries"
            )))
        };
    }
    let mut out = Vec::with_capacity(expected);
    let mut digits = String::new();
    for c in text.chars() {
        if c.is_ascii_digit() {
            digits.push(c);
            continue;
        }
        let s = Synapse::from_symbol(c).ok_or_else(|| err(format!("bad synapse symbol {c:?}")))?;
        let n: usize = digits
            .parse()
            .map_err(|_| err(format!("missing run length before {c:?}")))?;
        if n == 0 || out.len() + n > expected {
            return Err(err(format!("run length {n} overflows {expected} entries")));
        }
        out.extend(std::iter::repeat_n(s, n));
        digits.clear();
    }
    if !digits.is_empty() || out.len() != expected {
        return Err(err(format!(
            "decoded {} entries, expected {expected}",
            out.len()
        )));
    }
    Ok(out)
}

pub fn write_checkpoint<W: Write>(net: &MmvNetwork, mut out: W) -> std::io::Result<()> {
    let (c, k, w) = (net.neurons(), net.classes(), net.inputs());
    writeln!(out, "{MAGIC} {c} {k} {w}")?;
    let periods: Vec<String> = net.periods().iter().map(u32::to_string).collect();
    writeln!(out, "{}", periods.join(" "))?;
    writeln!(out, "{}", encode_rle(net.connectivity().input_matrix()))?;
    writeln!(out, "{}", encode_rle(net.connectivity().recurrent_matrix()))?;
    let readout = net.readout();
    for j in 0..c {
        let row: Vec<String> = (0..k)
            .map(|cls| readout.weight(j, cls).to_string())
            .collect();
        writeln!(out, "{}", row.join(" "))?;
    }
    let bias: Vec<String> = readout.bias().iter().map(f64::to_string).collect();
    writeln!(out, "{}", bias.join(" "))?;
    Ok(())
}

fn parse_floats(text: &str, expected: usize, line: usize) -> Result<Vec<f64>, CheckpointError> {
    let values = text
        .split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| CheckpointError::Parse {
                    line,
                    msg: format!("bad number {t:?}"),
                })
        })
        .collect::<Result<Vec<_>, _>>()?;
    if values.len() != expected {
        return Err(CheckpointError::Parse {
            line,
            msg: format!("expected {expected} values, found {}", values.len()),
        });
    }
    Ok(values)
}

pub fn read_checkpoint<R: Read>(reader: R) -> Result<MmvNetwork, CheckpointError> {
    let lines: Vec<String> = BufReader::new(reader).lines().collect::<Result<_, _>>()?;
    let get = |i: usize| -> Result<&str, CheckpointError> {
        lines
            .get(i)
            .map(String::as_str)
            .ok_or(CheckpointError::Parse {
                line: i + 1,
                msg: "unexpected end of checkpoint".into(),
            })
    };
    let header: Vec<&str> = get(0)?.split_whitespace().collect();
    if header.len() != 4 || header[0] != MAGIC {
        return Err(CheckpointError::Parse {
            line: 1,
            msg: format!("expected `{MAGIC} C K w_tw` header"),
        });
    }
    let dims = header[1..]
        .iter()
        .map(|t| t.parse::<usize>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CheckpointError::Parse {
            line: 1,
            msg: e.to_string(),
        })?;
    let (c, k, w) = (dims[0], dims[1], dims[2]);

    let periods = get(1)?
        .split_whitespace()
        .map(|t| t.parse::<u32>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CheckpointError::Parse {
            line: 2,
            msg: e.to_string(),
        })?;
    if periods.len() != c {
        return Err(CheckpointError::Parse {
            line: 2,
            msg: format!("expected {c} periods, found {}", periods.len()),
        });
    }
    let input = decode_rle(get(2)?, w * c, 3)?;
    let recurrent = decode_rle(get(3)?, c * c, 4)?;
    let mut weights = Vec::with_capacity(c * k);
    for j in 0..c {
        weights.extend(parse_floats(get(4 + j)?, k, 5 + j)?);
    }
    let bias = parse_floats(get(4 + c)?, k, 5 + c)?;
    if lines[5 + c..].iter().any(|l| !l.trim().is_empty()) {
        return Err(CheckpointError::Parse {
            line: 6 + c,
            msg: "trailing content after biases".into(),
        });
    }

    let conn = TernaryConnectivity::new(w, c, input, recurrent)?;
    let readout = Readout::new(c, k, weights, bias)?;
    Ok(MmvNetwork::new(conn, periods, readout)?)
}

pub fn save_checkpoint(net: &MmvNetwork, path: impl AsRef<std::path::Path>) -> std::io::Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_checkpoint(net, &mut f)?;
    f.flush()
}

pub fn load_checkpoint(path: impl AsRef<std::path::Path>) -> Result<MmvNetwork, CheckpointError> {
    read_checkpoint(std::fs::File::open(path)?)
}
