//! Plain-text model dump.
//!
//! ```text
//! calib-lab-mlp 1
//! layers <L>
//! shift <v_1> ... <v_in>
//! scale <v_1> ... <v_in>
//! grid none | grid <levels> <base_resolution> <features>
//!   range <lo> <hi>        (per input coordinate)
//!   <table rows>           (per coordinate and level)
//! layer <fan_in> <fan_out>
//! <row of W>            (fan_in lines)
//! <bias>
//! ...
//! ```
//! Floats are written in Rust's shortest round-trip form, so reading a dump
//! back reproduces the model bit for bit.

use std::io::{BufRead, Write};

use ndarray::{Array1, Array2};

use super::grid::{GridEncoding, GridSpec};
use super::model::{Dense, SoftmaxClassifier};
use crate::rng::seeded;
use crate::error::{Error, Result};

const MAGIC: &str = "calib-lab-mlp";
const VERSION: u32 = 1;

fn write_row<'a, W: Write>(w: &mut W, prefix: &str, v: impl Iterator<Item = &'a f64>) -> Result<()> {
    let s: Vec<String> = v.map(|x| x.to_string()).collect();
    if prefix.is_empty() {
        writeln!(w, "{}", s.join(" "))?;
    } else {
        writeln!(w, "{prefix} {}", s.join(" "))?;
    }
    Ok(())
}

pub fn write_checkpoint<W: Write>(model: &SoftmaxClassifier, mut w: W) -> Result<()> {
    writeln!(w, "{MAGIC} {VERSION}")?;
    writeln!(w, "layers {}", model.layers.len())?;
    write_row(&mut w, "shift", model.input_shift.iter())?;
    write_row(&mut w, "scale", model.input_scale.iter())?;
    match &model.grid {
        None => writeln!(w, "grid none")?,
        Some(g) => {
            let s = g.spec;
            writeln!(w, "grid {} {} {}", s.levels, s.base_resolution, s.features)?;
            for c in 0..g.dim() {
                write_row(&mut w, "range", [g.lo[c], g.hi[c]].iter())?;
            }
            for t in &g.tables {
                for row in t.outer_iter() {
                    write_row(&mut w, "", row.iter())?;
                }
            }
        }
    }
    for l in &model.layers {
        writeln!(w, "layer {} {}", l.fan_in(), l.fan_out())?;
        for row in l.weight.outer_iter() {
            write_row(&mut w, "", row.iter())?;
        }
        write_row(&mut w, "", l.bias.iter())?;
    }
    Ok(())
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    line: usize,
}

impl<R: BufRead> Lines<R> {
    fn next(&mut self) -> Result<String> {
        self.line += 1;
        match self.inner.next() {
            Some(l) => Ok(l?),
            None => Err(self.err("unexpected end of checkpoint")),
        }
    }

    fn err(&self, msg: &str) -> Error {
        Error::Parse(format!("checkpoint line {}: {msg}", self.line))
    }

    fn floats(&mut self, prefix: Option<&str>, n: usize) -> Result<Vec<f64>> {
        let l = self.next()?;
        let mut toks = l.split_whitespace();
        if let Some(p) = prefix {
            if toks.next() != Some(p) {
                return Err(self.err(&format!("expected '{p}'")));
            }
        }
        let v = toks
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| self.err("bad number"))?;
        if v.len() != n {
            return Err(self.err(&format!("expected {n} values, found {}", v.len())));
        }
        Ok(v)
    }

    fn header(&mut self, key: &str, n: usize) -> Result<Vec<usize>> {
        let l = self.next()?;
        let mut toks = l.split_whitespace();
        if toks.next() != Some(key) {
            return Err(self.err(&format!("expected '{key}'")));
        }
        let v = toks
            .map(|t| t.parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| self.err("bad integer"))?;
        if v.len() != n {
            return Err(self.err("wrong field count"));
        }
        Ok(v)
    }
}

pub fn read_checkpoint<R: BufRead>(r: R) -> Result<SoftmaxClassifier> {
    let mut lines = Lines {
        inner: r.lines(),
        line: 0,
    };
    let magic = lines.next()?;
    if magic.trim() != format!("{MAGIC} {VERSION}") {
        return Err(lines.err("not a version 1 model checkpoint"));
    }
    let n_layers = lines.header("layers", 1)?[0];
    if n_layers == 0 {
        return Err(lines.err("model has no layers"));
    }
    let l = lines.next()?;
    let dim = l.split_whitespace().count().saturating_sub(1);
    let parse = |l: &str, key: &str| -> Option<Vec<f64>> {
        let mut t = l.split_whitespace();
        (t.next() == Some(key)).then_some(())?;
        t.map(|x| x.parse().ok()).collect()
    };
    let shift = parse(&l, "shift").ok_or_else(|| lines.err("bad shift row"))?;
    let scale = lines.floats(Some("scale"), dim)?;
    let g = lines.next()?;
    let grid = if g.trim() == "grid none" {
        None
    } else {
        let v: Vec<usize> = g
            .split_whitespace()
            .skip(1)
            .map(|t| t.parse().ok())
            .collect::<Option<_>>()
            .filter(|v: &Vec<usize>| v.len() == 3 && g.starts_with("grid "))
            .ok_or_else(|| lines.err("bad grid header"))?;
        let spec = GridSpec {
            levels: v[0],
            base_resolution: v[1],
            features: v[2],
        };
        spec.validate()?;
        let mut enc = GridEncoding::new(spec, dim, &mut seeded(0));
        for c in 0..dim {
            let r = lines.floats(Some("range"), 2)?;
            enc.lo[c] = r[0];
            enc.hi[c] = r[1];
        }
        for t in &mut enc.tables {
            for mut row in t.outer_iter_mut() {
                let vals = lines.floats(None, spec.features)?;
                row.iter_mut().zip(vals).for_each(|(d, s)| *d = s);
            }
        }
        Some(enc)
    };
    let mut layers = Vec::with_capacity(n_layers);
    let mut expect_in = grid.as_ref().map_or(dim, |g| g.output_dim());
    for _ in 0..n_layers {
        let h = lines.header("layer", 2)?;
        let (fi, fo) = (h[0], h[1]);
        if fi != expect_in {
            return Err(lines.err("layer shapes do not chain"));
        }
        let mut weight = Array2::zeros((fi, fo));
        for r in 0..fi {
            for (c, v) in lines.floats(None, fo)?.into_iter().enumerate() {
                weight[(r, c)] = v;
            }
        }
        let bias = Array1::from(lines.floats(None, fo)?);
        layers.push(Dense { weight, bias });
        expect_in = fo;
    }
    Ok(SoftmaxClassifier {
        input_shift: Array1::from(shift),
        input_scale: Array1::from(scale),
        grid,
        layers,
    })
}
