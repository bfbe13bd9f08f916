use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use indexmap::IndexMap;

use super::tensor::Tensor;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"PQL1";

/// Named trainable tensors, iterated in insertion order.
///
/// `clone` shares the underlying tensors; [`ParameterSet::deep_clone`] makes
/// an independent copy.
#[derive(Debug, Clone, Default)]
pub struct ParameterSet {
    tensors: IndexMap<String, Tensor>,
}

impl ParameterSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) -> Result<()> {
        let name = name.into();
        if self.tensors.contains_key(&name) {
            return Err(Error::DuplicateParameter(name));
        }
        self.tensors.insert(name, tensor);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.tensors
            .get(name)
            .ok_or_else(|| Error::ParameterMismatch(format!("no parameter named `{name}`")))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn numel(&self) -> usize {
        self.tensors.values().map(Tensor::len).sum()
    }

    pub fn zero_grad(&self) {
        self.tensors.values().for_each(Tensor::zero_grad);
    }

    /// Fresh leaves holding copies of the current values, with no gradients.
    pub fn deep_clone(&self) -> ParameterSet {
        let tensors = self
            .tensors
            .iter()
            .map(|(k, t)| {
                let copy = Tensor::param(t.rows(), t.cols(), t.to_vec()).expect("valid shape");
                (k.clone(), copy)
            })
            .collect();
        ParameterSet { tensors }
    }

    /// Exact value equality, name by name.
    pub fn values_equal(&self, other: &ParameterSet) -> bool {
        self.len() == other.len()
            && self.iter().zip(other.iter()).all(|((na, a), (nb, b))| {
                na == nb
                    && a.shape() == b.shape()
                    && a.data().iter().zip(b.data().iter()).all(|(x, y)| x.to_bits() == y.to_bits())
            })
    }

    /// Plain `(name, shape, values)` snapshot, safe to send between threads.
    pub fn snapshot(&self) -> Vec<(String, [usize; 2], Vec<f64>)> {
        self.iter()
            .map(|(n, t)| (n.to_string(), t.shape(), t.to_vec()))
            .collect()
    }

    pub fn from_snapshot(snapshot: &[(String, [usize; 2], Vec<f64>)]) -> Result<ParameterSet> {
        let mut set = ParameterSet::new();
        for (name, [r, c], values) in snapshot {
            set.insert(name.clone(), Tensor::param(*r, *c, values.clone())?)?;
        }
        Ok(set)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&(self.len() as u32).to_le_bytes())?;
        for (name, t) in self.iter() {
            w.write_all(&(name.len() as u32).to_le_bytes())?;
            w.write_all(name.as_bytes())?;
            w.write_all(&2u32.to_le_bytes())?;
            for d in t.shape() {
                w.write_all(&(d as u64).to_le_bytes())?;
            }
            for v in t.data().iter() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<ParameterSet> {
        let bad = |e: io::Error| Error::Checkpoint(e.to_string());
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(bad)?;
        if &magic != MAGIC {
            return Err(Error::Checkpoint(format!("bad magic {magic:?}")));
        }
        let count = read_u32(&mut r).map_err(bad)?;
        let mut set = ParameterSet::new();
        for _ in 0..count {
            let name_len = read_u32(&mut r).map_err(bad)? as usize;
            let mut name = vec![0u8; name_len];
            r.read_exact(&mut name).map_err(bad)?;
            let name = String::from_utf8(name).map_err(|e| Error::Checkpoint(e.to_string()))?;
            let rank = read_u32(&mut r).map_err(bad)?;
            let dims = (0..rank)
                .map(|_| read_u64(&mut r).map(|d| d as usize))
                .collect::<io::Result<Vec<_>>>()
                .map_err(bad)?;
            let (rows, cols) = match dims[..] {
                [n] => (1, n),
                [rows, cols] => (rows, cols),
                _ => return Err(Error::Checkpoint(format!("unsupported rank {rank} for `{name}`"))),
            };
            let mut values = Vec::with_capacity(rows * cols);
            let mut buf = [0u8; 8];
            for _ in 0..rows * cols {
                r.read_exact(&mut buf).map_err(bad)?;
                values.push(f64::from_le_bytes(buf));
            }
            set.insert(name, Tensor::param(rows, cols, values)?)?;
        }
        Ok(set)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut bytes = Vec::new();
        self.write_to(&mut bytes).expect("writing to memory");
        fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<ParameterSet> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        ParameterSet::read_from(&bytes[..])
    }
}

fn read_u32<R: Read>(r: &mut R) -> io::Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> io::Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

/// Overwrites every tensor of `dst` with the values of the same-named tensor
/// in `src` and clears `dst`'s gradients.
pub fn copy_parameters(src: &ParameterSet, dst: &ParameterSet) -> Result<()> {
    if src.len() != dst.len() {
        return Err(Error::ParameterMismatch(format!(
            "{} tensors vs {}",
            src.len(),
            dst.len()
        )));
    }
    for (name, s) in src.iter() {
        let d = dst.get(name)?;
        if s.shape() != d.shape() {
            return Err(Error::ParameterMismatch(format!(
                "`{name}` has shape {:?} vs {:?}",
                s.shape(),
                d.shape()
            )));
        }
    }
    for (name, s) in src.iter() {
        let d = dst.get(name)?;
        d.data_mut().copy_from_slice(&s.data());
        d.zero_grad();
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(values: &[(&str, &[f64])]) -> ParameterSet {
        let mut s = ParameterSet::new();
        for (n, v) in values {
            s.insert(*n, Tensor::param(1, v.len(), v.to_vec()).unwrap()).unwrap();
        }
        s
    }

    #[test]
    fn duplicate_names_rejected() {
        let mut s = set(&[("a", &[1.0])]);
        assert!(matches!(
            s.insert("a", Tensor::scalar(0.0)),
            Err(Error::DuplicateParameter(_))
        ));
    }

    #[test]
    fn copy_is_exact_and_by_value() {
        let src = set(&[("w", &[1.0, 2.0]), ("b", &[0.5])]);
        let dst = set(&[("w", &[0.0, 0.0]), ("b", &[0.0])]);
        dst.get("w").unwrap().mul(dst.get("w").unwrap()).unwrap().sum().backward().unwrap();
        copy_parameters(&src, &dst).unwrap();
        assert!(src.values_equal(&dst));
        assert!(dst.get("w").unwrap().grad().is_none());
        src.get("w").unwrap().data_mut()[0] = 99.0;
        assert_eq!(dst.get("w").unwrap().to_vec(), vec![1.0, 2.0]);
    }

    #[test]
    fn copy_of_empty_is_noop() {
        copy_parameters(&ParameterSet::new(), &ParameterSet::new()).unwrap();
    }

    #[test]
    fn copy_rejects_mismatch() {
        let a = set(&[("w", &[1.0, 2.0])]);
        assert!(copy_parameters(&a, &set(&[("v", &[1.0, 2.0])])).is_err());
        assert!(copy_parameters(&a, &set(&[("w", &[1.0])])).is_err());
        assert!(copy_parameters(&a, &ParameterSet::new()).is_err());
    }

    #[test]
    fn checkpoint_layout() {
        let s = set(&[("ab", &[1.5])]);
        let mut bytes = Vec::new();
        s.write_to(&mut bytes).unwrap();
        let mut expected = b"PQL1".to_vec();
        expected.extend(1u32.to_le_bytes());
        expected.extend(2u32.to_le_bytes());
        expected.extend(b"ab");
        expected.extend(2u32.to_le_bytes());
        expected.extend(1u64.to_le_bytes());
        expected.extend(1u64.to_le_bytes());
        expected.extend(1.5f64.to_le_bytes());
        assert_eq!(bytes, expected);
        assert!(ParameterSet::read_from(&bytes[..]).unwrap().values_equal(&s));
        assert!(ParameterSet::read_from(&b"PQL2"[..]).is_err());
        assert!(ParameterSet::read_from(&bytes[..bytes.len() - 1]).is_err());
    }
}
