//! Versioned binary dump of problem instances so golden tests can pin them.
//!
//! Layout: 8-byte magic, u32 version, u8 kind tag, then the instance payload
//! with every integer as u64 LE and every float as f64 LE bits. Writing the
//! same instance twice produces byte-identical files.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::blocks::{BlockPartition, BlockVector};
use crate::error::{Error, Result};
use crate::geometry::Regularizer;
use crate::oracles::{DenseMatrix, Instance, L1Regression, OnlineLasso, ScalingLaw, TransformedLs};
use crate::schedules::SamplingDistribution;

const MAGIC: &[u8; 8] = b"SBDAINST";
const VERSION: u32 = 1;

const KIND_L1: u8 = 1;
const KIND_TLS: u8 = 2;
const KIND_LASSO: u8 = 3;

pub fn write_instance(path: &Path, instance: &Instance) -> Result<()> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    match instance {
        Instance::L1Regression(o) => {
            w.write_all(&[KIND_L1])?;
            write_common(&mut w, &o.partition, &o.regularizer, o.seed)?;
            match o.scaling {
                ScalingLaw::Uniform => {
                    w.write_all(&[0u8])?;
                    write_f64(&mut w, 0.0)?;
                }
                ScalingLaw::PowerLaw { a } => {
                    w.write_all(&[1u8])?;
                    write_f64(&mut w, a)?;
                }
            }
            write_f64(&mut w, o.noise_var)?;
            write_u64(&mut w, o.data.rows() as u64)?;
            write_u64(&mut w, o.data.cols() as u64)?;
            write_f64_slice(&mut w, o.data.data())?;
            write_f64_slice(&mut w, &o.targets)?;
            write_f64_slice(&mut w, &o.scales)?;
            write_f64_slice(&mut w, o.planted.as_slice())?;
        }
        Instance::TransformedLs(o) => {
            w.write_all(&[KIND_TLS])?;
            write_common(&mut w, &o.partition, &o.regularizer, o.seed)?;
            write_f64(&mut w, o.rescale)?;
            write_f64(&mut w, o.rescaled_fraction)?;
            write_u64(&mut w, o.train.cols() as u64)?;
            write_u64(&mut w, o.train.rows() as u64)?;
            write_u64(&mut w, o.test.rows() as u64)?;
            write_f64_slice(&mut w, o.train.data())?;
            write_f64_slice(&mut w, &o.train_targets)?;
            write_f64_slice(&mut w, o.test.data())?;
            write_f64_slice(&mut w, &o.test_targets)?;
            write_f64_slice(&mut w, o.planted.as_slice())?;
        }
        Instance::OnlineLasso(o) => {
            w.write_all(&[KIND_LASSO])?;
            write_common(&mut w, &o.partition, &o.regularizer, o.seed)?;
            write_f64(&mut w, o.noise_std)?;
            write_f64_slice(&mut w, o.planted.as_slice())?;
            write_f64_slice(&mut w, o.feature_sampler.probabilities())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_instance(path: &Path) -> Result<Instance> {
    let file = File::open(path)?;
    let mut r = BufReader::new(file);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("bad magic; not an instance file".into()));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::Format(format!(
            "unsupported instance version {version} (expected {VERSION})"
        )));
    }
    let kind = read_u8(&mut r)?;
    match kind {
        KIND_L1 => {
            let (partition, regularizer, seed) = read_common(&mut r)?;
            let law_tag = read_u8(&mut r)?;
            let a = read_f64(&mut r)?;
            let scaling = match law_tag {
                0 => ScalingLaw::Uniform,
                1 => ScalingLaw::PowerLaw { a },
                t => return Err(Error::Format(format!("bad scaling tag {t}"))),
            };
            let noise_var = read_f64(&mut r)?;
            let m = read_u64(&mut r)? as usize;
            let n = read_u64(&mut r)? as usize;
            let data = DenseMatrix::new(m, n, read_f64_vec(&mut r, m * n)?)?;
            let targets = read_f64_vec(&mut r, m)?;
            let scales = read_f64_vec(&mut r, n)?;
            let planted = BlockVector::from_vec(&partition, read_f64_vec(&mut r, n)?)?;
            Ok(Instance::L1Regression(L1Regression {
                partition,
                data,
                targets,
                scales,
                planted,
                regularizer,
                noise_var,
                scaling,
                seed,
                deterministic: false,
            }))
        }
        KIND_TLS => {
            let (partition, regularizer, seed) = read_common(&mut r)?;
            let rescale = read_f64(&mut r)?;
            let rescaled_fraction = read_f64(&mut r)?;
            let n = read_u64(&mut r)? as usize;
            let m_train = read_u64(&mut r)? as usize;
            let m_test = read_u64(&mut r)? as usize;
            let train = DenseMatrix::new(m_train, n, read_f64_vec(&mut r, m_train * n)?)?;
            let train_targets = read_f64_vec(&mut r, m_train)?;
            let test = DenseMatrix::new(m_test, n, read_f64_vec(&mut r, m_test * n)?)?;
            let test_targets = read_f64_vec(&mut r, m_test)?;
            let planted = BlockVector::from_vec(&partition, read_f64_vec(&mut r, n)?)?;
            Ok(Instance::TransformedLs(TransformedLs {
                partition,
                train,
                train_targets,
                test,
                test_targets,
                planted,
                regularizer,
                rescale,
                rescaled_fraction,
                seed,
                deterministic: false,
            }))
        }
        KIND_LASSO => {
            let (partition, regularizer, seed) = read_common(&mut r)?;
            let noise_std = read_f64(&mut r)?;
            let n = partition.total();
            let planted = BlockVector::from_vec(&partition, read_f64_vec(&mut r, n)?)?;
            let p = read_f64_vec(&mut r, n)?;
            let feature_sampler = SamplingDistribution::new(p)?;
            let planted_sq_norm = planted.norm().powi(2);
            Ok(Instance::OnlineLasso(OnlineLasso {
                partition,
                planted,
                feature_sampler,
                regularizer,
                noise_std,
                seed,
                deterministic: false,
                planted_sq_norm,
            }))
        }
        t => Err(Error::Format(format!("unknown instance kind {t}"))),
    }
}

fn write_common<W: Write>(
    w: &mut W,
    partition: &BlockPartition,
    reg: &Regularizer,
    seed: u64,
) -> Result<()> {
    write_u64(w, partition.num_blocks() as u64)?;
    for &s in partition.sizes() {
        write_u64(w, s as u64)?;
    }
    let (tag, p1, p2): (u8, f64, f64) = match reg {
        Regularizer::Zero => (0, 0.0, 0.0),
        Regularizer::L1 { weight } => (1, *weight, 0.0),
        Regularizer::SqL2 { modulus } => (2, *modulus, 0.0),
        Regularizer::Box { lo, hi } => (3, *lo, *hi),
    };
    w.write_all(&[tag])?;
    write_f64(w, p1)?;
    write_f64(w, p2)?;
    write_u64(w, seed)?;
    Ok(())
}

type Common = (std::sync::Arc<BlockPartition>, Regularizer, u64);

fn read_common<R: Read>(r: &mut R) -> Result<Common> {
    let nblocks = read_u64(r)? as usize;
    if nblocks > 1 << 24 {
        return Err(Error::Format(format!("implausible block count {nblocks}")));
    }
    let mut sizes = Vec::with_capacity(nblocks);
    for _ in 0..nblocks {
        sizes.push(read_u64(r)? as usize);
    }
    let partition = BlockPartition::new(sizes)?;
    let tag = read_u8(r)?;
    let p1 = read_f64(r)?;
    let p2 = read_f64(r)?;
    let reg = match tag {
        0 => Regularizer::Zero,
        1 => Regularizer::L1 { weight: p1 },
        2 => Regularizer::SqL2 { modulus: p1 },
        3 => Regularizer::Box { lo: p1, hi: p2 },
        t => return Err(Error::Format(format!("bad regularizer tag {t}"))),
    };
    let seed = read_u64(r)?;
    Ok((partition, reg, seed))
}

fn write_u64<W: Write>(w: &mut W, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn write_f64<W: Write>(w: &mut W, v: f64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn write_f64_slice<W: Write>(w: &mut W, vs: &[f64]) -> Result<()> {
    write_u64(w, vs.len() as u64)?;
    for &v in vs {
        write_f64(w, v)?;
    }
    Ok(())
}

fn read_u8<R: Read>(r: &mut R) -> Result<u8> {
    let mut b = [0u8; 1];
    r.read_exact(&mut b)?;
    Ok(b[0])
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

fn read_f64_vec<R: Read>(r: &mut R, expected: usize) -> Result<Vec<f64>> {
    let len = read_u64(r)? as usize;
    if len != expected {
        return Err(Error::Format(format!(
            "array length {len} does not match expected {expected}"
        )));
    }
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        out.push(read_f64(r)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::{gen_l1_regression, gen_transformed_ls, StochasticOracle};
    use crate::schedules::SamplingDistribution;

    #[test]
    fn l1_roundtrip_preserves_everything() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.inst");
        let mut o = gen_l1_regression(20, 8, 2, 0.01, ScalingLaw::PowerLaw { a: 5.0 }, 3).unwrap();
        o.set_regularizer(Regularizer::SqL2 { modulus: 0.1 });
        let inst = Instance::L1Regression(o);
        write_instance(&path, &inst).unwrap();
        let back = read_instance(&path).unwrap();
        match (inst, back) {
            (Instance::L1Regression(a), Instance::L1Regression(b)) => {
                assert_eq!(a.data, b.data);
                assert_eq!(a.targets, b.targets);
                assert_eq!(a.scales, b.scales);
                assert_eq!(a.planted, b.planted);
                assert_eq!(a.regularizer, b.regularizer);
                assert_eq!(a.seed, b.seed);
            }
            _ => panic!("kind changed in roundtrip"),
        }
    }

    #[test]
    fn writes_are_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let (p1, p2) = (dir.path().join("a"), dir.path().join("b"));
        let o = gen_transformed_ls(10, 15, 5, 2, 0.1, 0.9, 7).unwrap();
        write_instance(&p1, &Instance::TransformedLs(o.clone())).unwrap();
        write_instance(&p2, &Instance::TransformedLs(o)).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    }

    #[test]
    fn lasso_roundtrip_preserves_loss_surface() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("l.inst");
        let sampler = SamplingDistribution::new(vec![1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let o = gen_online_lasso_for_test(5, 0.2, sampler, 13);
        let inst = Instance::OnlineLasso(o);
        write_instance(&path, &inst).unwrap();
        let back = read_instance(&path).unwrap();
        let w = crate::blocks::BlockVector::from_vec(
            inst.partition(),
            vec![0.3, -0.2, 0.0, 0.5, 0.1],
        )
        .unwrap();
        assert_eq!(inst.objective(&w), back.objective(&w));
        assert_eq!(inst.planted(), back.planted());
    }

    fn gen_online_lasso_for_test(
        n: usize,
        lambda: f64,
        sampler: SamplingDistribution,
        seed: u64,
    ) -> crate::oracles::OnlineLasso {
        crate::oracles::gen_online_lasso(n, lambda, sampler, seed).unwrap()
    }

    #[test]
    fn rejects_corrupt_headers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad");
        std::fs::write(&path, b"NOTANINSTANCE").unwrap();
        assert!(matches!(read_instance(&path), Err(Error::Format(_))));
    }
}
