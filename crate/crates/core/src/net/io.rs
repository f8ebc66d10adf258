//! Flat text format:
//!
//! ```text
//! fnm-shallow-net 1
//! activation relu_pow 2
//! dim 1
//! units 1
//! tail 1
//! t 0x1p+0 2
//! u 0x1p+0 0x1p+0 -0x1.8p-1
//! ```
//!
//! Tail lines are `t <coeff> <α_1> … <α_d>`, unit lines `u <a> <w_1> … <w_d> <b>`.

use std::fmt::Write as _;

use super::{ShallowNet, TailTerm};
use crate::activations::Activation;
use crate::error::{FnmError, Result};
use crate::hexfloat;

const MAGIC: &str = "fnm-shallow-net 1";

pub fn write_net(net: &ShallowNet) -> String {
    let mut s = String::new();
    let k = net.activation().degree().unwrap_or(0);
    writeln!(s, "{MAGIC}").unwrap();
    writeln!(s, "activation {} {k}", net.activation().name()).unwrap();
    writeln!(s, "dim {}", net.dim()).unwrap();
    writeln!(s, "units {}", net.units()).unwrap();
    writeln!(s, "tail {}", net.tail().len()).unwrap();
    for t in net.tail() {
        write!(s, "t {}", hexfloat::format(t.coeff)).unwrap();
        for a in &t.alpha {
            write!(s, " {a}").unwrap();
        }
        s.push('\n');
    }
    for i in 0..net.units() {
        write!(s, "u {}", hexfloat::format(net.outer()[i])).unwrap();
        for w in net.inner(i) {
            write!(s, " {}", hexfloat::format(*w)).unwrap();
        }
        writeln!(s, " {}", hexfloat::format(net.bias()[i])).unwrap();
    }
    s
}

fn header<'a>(lines: &mut impl Iterator<Item = &'a str>, key: &str) -> Result<Vec<&'a str>> {
    let line = lines
        .next()
        .ok_or_else(|| FnmError::Parse(format!("missing '{key}' line")))?;
    let mut parts = line.split_whitespace();
    if parts.next() != Some(key) {
        return Err(FnmError::Parse(format!("expected '{key}', found '{line}'")));
    }
    Ok(parts.collect())
}

fn count(v: &[&str], key: &str) -> Result<usize> {
    match v {
        [n] => n.parse().map_err(|_| FnmError::Parse(format!("bad {key} count '{n}'"))),
        _ => Err(FnmError::Parse(format!("'{key}' takes one value"))),
    }
}

pub fn read_net(text: &str) -> Result<ShallowNet> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    if lines.next() != Some(MAGIC) {
        return Err(FnmError::Parse("missing network header".into()));
    }
    let act = header(&mut lines, "activation")?;
    let activation = match act.as_slice() {
        ["relu_pow", k] => Activation::relu_pow(k.parse().map_err(|_| FnmError::Parse("bad degree".into()))?)?,
        ["bspline", k] => Activation::bspline(k.parse().map_err(|_| FnmError::Parse("bad degree".into()))?)?,
        ["cosine", _] => Activation::Cosine,
        _ => return Err(FnmError::Parse(format!("unknown activation {act:?}"))),
    };
    let dim = count(&header(&mut lines, "dim")?, "dim")?;
    let units = count(&header(&mut lines, "units")?, "units")?;
    let tails = count(&header(&mut lines, "tail")?, "tail")?;
    let mut tail = Vec::with_capacity(tails);
    for _ in 0..tails {
        let v = header(&mut lines, "t")?;
        if v.len() != dim + 1 {
            return Err(FnmError::Parse("tail line has wrong arity".into()));
        }
        let alpha = v[1..]
            .iter()
            .map(|a| a.parse().map_err(|_| FnmError::Parse(format!("bad exponent '{a}'"))))
            .collect::<Result<Vec<usize>>>()?;
        tail.push(TailTerm { alpha, coeff: hexfloat::parse(v[0])? });
    }
    let (mut outer, mut inner, mut bias) = (Vec::new(), Vec::new(), Vec::new());
    for _ in 0..units {
        let v = header(&mut lines, "u")?;
        if v.len() != dim + 2 {
            return Err(FnmError::Parse("unit line has wrong arity".into()));
        }
        let vals = v.iter().map(|s| hexfloat::parse(s)).collect::<Result<Vec<f64>>>()?;
        outer.push(vals[0]);
        inner.extend_from_slice(&vals[1..=dim]);
        bias.push(vals[dim + 1]);
    }
    if let Some(extra) = lines.next() {
        return Err(FnmError::Parse(format!("trailing content '{extra}'")));
    }
    if !(1..=3).contains(&dim) {
        return Err(FnmError::Parse(format!("dimension {dim} out of range")));
    }
    ShallowNet::from_flat(activation, dim, outer, inner, bias, tail)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_is_bit_exact() {
        let net = ShallowNet::new(
            Activation::bspline(3).unwrap(),
            2,
            vec![0.1, -1.0 / 3.0],
            vec![vec![1e-300, -2.5], vec![f64::MIN_POSITIVE / 4.0, 7.0]],
            vec![-0.0, 1e10],
            vec![TailTerm { alpha: vec![1, 2], coeff: std::f64::consts::PI }],
        )
        .unwrap();
        let text = write_net(&net);
        assert!(text.starts_with(MAGIC));
        assert_eq!(read_net(&text).unwrap(), net);
        assert!(read_net(&text.replace("units 2", "units 3")).is_err());
    }
}
