//! `HED1` model files.
//!
//! Little-endian:
//!
//! ```text
//! b"HED1" | u8 kind (0 softmax, 1 svm, 2 knn) | u32 K | u32 D | K x u32 class id
//! softmax, svm: K*D f32 weights (class-major) | K f32 biases
//! knn:          u32 k | u32 count | count x ( u16 id_len | id | u32 label | D x f32 )
//! ```

use super::{HeadError, KnnModel, LabeledEmbeddings, SoftmaxModel, SvmModel, TrainedHead};

pub const MAGIC: &[u8; 4] = b"HED1";

fn put_u32(out: &mut Vec<u8>, v: usize, what: &str) -> Result<(), HeadError> {
    let v = u32::try_from(v).map_err(|_| HeadError::Format(format!("{what} {v} exceeds u32")))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

fn put_f32s(out: &mut Vec<u8>, vals: &[f32]) {
    for v in vals {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn encode(head: &TrainedHead) -> Result<Vec<u8>, HeadError> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.push(head.kind().code());
    put_u32(&mut out, head.num_classes(), "class count")?;
    put_u32(&mut out, head.dim(), "dimension")?;
    let class_order: Vec<usize> = match head {
        TrainedHead::Softmax(m) => m.class_order.clone(),
        TrainedHead::Svm(m) => m.class_order.clone(),
        TrainedHead::Knn(m) => (0..m.num_classes()).collect(),
    };
    for c in class_order {
        put_u32(&mut out, c, "class id")?;
    }
    match head {
        TrainedHead::Softmax(m) => {
            put_f32s(&mut out, &m.weights);
            put_f32s(&mut out, &m.bias);
        }
        TrainedHead::Svm(m) => {
            put_f32s(&mut out, &m.weights);
            put_f32s(&mut out, &m.bias);
        }
        TrainedHead::Knn(m) => {
            let refs = m.references();
            put_u32(&mut out, m.k, "k")?;
            put_u32(&mut out, refs.len(), "reference count")?;
            for i in 0..refs.len() {
                let id = refs.id(i);
                let len = u16::try_from(id.len())
                    .map_err(|_| HeadError::Format(format!("reference id `{id}` longer than 65535 bytes")))?;
                out.extend_from_slice(&len.to_le_bytes());
                out.extend_from_slice(id.as_bytes());
                put_u32(&mut out, refs.label(i), "label")?;
                put_f32s(&mut out, refs.row(i));
            }
        }
    }
    Ok(out)
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], HeadError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| HeadError::Format(format!("truncated while reading {what}")))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8, HeadError> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16, HeadError> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<usize, HeadError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()) as usize)
    }

    fn f32s(&mut self, n: usize, what: &str) -> Result<Vec<f32>, HeadError> {
        let bytes = n
            .checked_mul(4)
            .ok_or_else(|| HeadError::Format(format!("{what} length overflows")))?;
        Ok(self
            .take(bytes, what)?
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect())
    }
}

pub fn decode(bytes: &[u8]) -> Result<TrainedHead, HeadError> {
    let mut c = Cursor { buf: bytes, pos: 0 };
    if c.take(4, "magic")? != MAGIC {
        return Err(HeadError::Format("bad magic, expected HED1".into()));
    }
    let kind = c.u8("head kind")?;
    let k = c.u32("class count")?;
    let d = c.u32("dimension")?;
    if k == 0 || d == 0 {
        return Err(HeadError::Format(format!("degenerate shape K={k}, D={d}")));
    }
    let mut class_order = Vec::with_capacity(k.min(1 << 16));
    for _ in 0..k {
        class_order.push(c.u32("class id")?);
    }

    let head = match kind {
        0 | 1 => {
            let weights = c.f32s(k * d, "weights")?;
            let bias = c.f32s(k, "biases")?;
            if kind == 0 {
                let mut m = SoftmaxModel::from_parts(d, weights, bias)
                    .map_err(|_| HeadError::Format("non-finite softmax parameter".into()))?;
                m.class_order = class_order;
                TrainedHead::Softmax(m)
            } else {
                let mut m = SvmModel::from_parts(d, weights, bias)
                    .map_err(|_| HeadError::Format("non-finite svm parameter".into()))?;
                m.class_order = class_order;
                TrainedHead::Svm(m)
            }
        }
        2 => {
            let knn_k = c.u32("k")?;
            let count = c.u32("reference count")?;
            let mut refs = LabeledEmbeddings::new(d, k);
            for _ in 0..count {
                let len = c.u16("reference id length")? as usize;
                let id = std::str::from_utf8(c.take(len, "reference id")?)
                    .map_err(|_| HeadError::Format("reference id is not UTF-8".into()))?
                    .to_string();
                let label = c.u32("label")?;
                let v = c.f32s(d, "reference vector")?;
                refs.push(id, &v, label)
                    .map_err(|e| HeadError::Format(format!("bad reference: {e}")))?;
            }
            TrainedHead::Knn(KnnModel::new(knn_k, refs).map_err(|e| HeadError::Format(e.to_string()))?)
        }
        other => return Err(HeadError::Format(format!("unknown head kind {other}"))),
    };
    if c.pos != bytes.len() {
        return Err(HeadError::Format(format!("{} trailing bytes", bytes.len() - c.pos)));
    }
    Ok(head)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_header_layout() {
        let m = SoftmaxModel::from_parts(2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0], vec![0.5, -0.5, 0.25]).unwrap();
        let bytes = encode(&TrainedHead::Softmax(m)).unwrap();
        assert_eq!(&bytes[..4], b"HED1");
        assert_eq!(bytes[4], 0);
        assert_eq!(u32::from_le_bytes(bytes[5..9].try_into().unwrap()), 3);
        assert_eq!(u32::from_le_bytes(bytes[9..13].try_into().unwrap()), 2);
        // 13 header + 3 class ids + 6 weights + 3 biases
        assert_eq!(bytes.len(), 13 + 12 + 24 + 12);
        assert_eq!(f32::from_le_bytes(bytes[25..29].try_into().unwrap()), 1.0);
    }

    #[test]
    fn knn_round_trip() {
        let mut refs = LabeledEmbeddings::new(2, 3);
        refs.push("x", &[0.5, f32::MIN_POSITIVE], 2).unwrap();
        refs.push("yy", &[-0.0, 7.25], 0).unwrap();
        let head = TrainedHead::Knn(KnnModel::new(2, refs).unwrap());
        let bytes = encode(&head).unwrap();
        assert_eq!(bytes[4], 2);
        assert_eq!(decode(&bytes).unwrap(), head);
    }

    #[test]
    fn rejects_corruption() {
        let head = TrainedHead::Svm(SvmModel::zeros(2, 3));
        let bytes = encode(&head).unwrap();
        assert_eq!(decode(&bytes).unwrap(), head);
        for cut in [0, 4, 12, bytes.len() - 1] {
            assert!(matches!(decode(&bytes[..cut]), Err(HeadError::Format(_))));
        }
        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(matches!(decode(&bad), Err(HeadError::Format(_))));
        let mut long = bytes;
        long.extend_from_slice(&[0, 0]);
        assert!(matches!(decode(&long), Err(HeadError::Format(_))));
    }
}
