use ndarray::Array2;

use super::hyper::Hyperparams;
use super::vocab::{EOS, GO, PAD};
use crate::error::{Error, Result};

/// One padded minibatch, shaped by a single bucket.
///
/// Sources are reversed and then right-padded; target inputs are
/// GO-prefixed, target outputs EOS-suffixed, and the mask marks real target
/// tokens (including EOS).
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub bucket: usize,
    pub src: Array2<usize>,
    pub tgt_input: Array2<usize>,
    pub tgt_output: Array2<usize>,
    pub mask: Array2<f64>,
}

/// Picks the smallest bucket that fits `(src_len, tgt_len + 2)`; `None`
/// means even the largest bucket is too small and truncation applies.
fn fitting_bucket(buckets: &[(usize, usize)], src_len: usize, tgt_len: usize) -> Option<usize> {
    buckets
        .iter()
        .position(|&(s, t)| s >= src_len && t >= tgt_len + 2)
}

/// Builds the padded source row for a bucket: keep the last `src_cap`
/// tokens, reverse, right-pad with PAD.
pub(crate) fn source_row(src: &[usize], src_cap: usize) -> Vec<usize> {
    let start = src.len().saturating_sub(src_cap);
    let mut row: Vec<usize> = src[start..].iter().rev().copied().collect();
    row.resize(src_cap, PAD);
    row
}

/// Assembles a training batch from exactly `hp.minibatch` id pairs.
///
/// The bucket is the smallest that fits every pair (targets need room for
/// GO and EOS); when none does, sources keep their last `src_len` tokens
/// and targets their first `tgt_len - 2`.
pub fn prepare_batch(pairs: &[(Vec<usize>, Vec<usize>)], hp: &Hyperparams) -> Result<Batch> {
    if pairs.is_empty() {
        return Err(Error::invalid("cannot batch zero pairs"));
    }
    if pairs.len() != hp.minibatch {
        return Err(Error::invalid(format!(
            "expected {} pairs per batch, got {}",
            hp.minibatch,
            pairs.len()
        )));
    }
    let max_src = pairs.iter().map(|(s, _)| s.len()).max().unwrap_or(0);
    let max_tgt = pairs.iter().map(|(_, t)| t.len()).max().unwrap_or(0);
    let bucket = fitting_bucket(&hp.buckets, max_src, max_tgt).unwrap_or(hp.buckets.len() - 1);
    let (src_cap, tgt_cap) = hp.buckets[bucket];

    let batch_size = pairs.len();
    let mut src = Array2::from_elem((batch_size, src_cap), PAD);
    let mut tgt_input = Array2::from_elem((batch_size, tgt_cap), PAD);
    let mut tgt_output = Array2::from_elem((batch_size, tgt_cap), PAD);
    let mut mask = Array2::zeros((batch_size, tgt_cap));

    for (b, (src_ids, tgt_ids)) in pairs.iter().enumerate() {
        for (j, &id) in source_row(src_ids, src_cap).iter().enumerate() {
            src[[b, j]] = id;
        }
        let tgt_kept = &tgt_ids[..tgt_ids.len().min(tgt_cap - 2)];
        tgt_input[[b, 0]] = GO;
        for (j, &id) in tgt_kept.iter().enumerate() {
            tgt_input[[b, j + 1]] = id;
            tgt_output[[b, j]] = id;
            mask[[b, j]] = 1.0;
        }
        tgt_output[[b, tgt_kept.len()]] = EOS;
        mask[[b, tgt_kept.len()]] = 1.0;
    }

    Ok(Batch {
        bucket,
        src,
        tgt_input,
        tgt_output,
        mask,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hp_with(buckets: Vec<(usize, usize)>, minibatch: usize) -> Hyperparams {
        Hyperparams {
            buckets,
            minibatch,
            ..Hyperparams::desk()
        }
    }

    #[test]
    fn source_reversed_and_padded() {
        let hp = hp_with(vec![(5, 10)], 1);
        let batch = prepare_batch(&[(vec![5, 6, 7], vec![8])], &hp).unwrap();
        assert_eq!(batch.bucket, 0);
        assert_eq!(batch.src.row(0).to_vec(), vec![7, 6, 5, PAD, PAD]);
        let mut want_in = vec![PAD; 10];
        want_in[0] = GO;
        want_in[1] = 8;
        assert_eq!(batch.tgt_input.row(0).to_vec(), want_in);
        let mut want_out = vec![PAD; 10];
        want_out[0] = 8;
        want_out[1] = EOS;
        assert_eq!(batch.tgt_output.row(0).to_vec(), want_out);
        let mut want_mask = vec![0.0; 10];
        want_mask[0] = 1.0;
        want_mask[1] = 1.0;
        assert_eq!(batch.mask.row(0).to_vec(), want_mask);
    }

    #[test]
    fn long_source_keeps_last_tokens() {
        let hp = hp_with(vec![(5, 10), (40, 45)], 1);
        let src: Vec<usize> = (100..160).collect();
        let batch = prepare_batch(&[(src.clone(), vec![8])], &hp).unwrap();
        assert_eq!(batch.bucket, 1);
        // Last 40 tokens (120..160), reversed.
        let want: Vec<usize> = (120..160).rev().collect();
        assert_eq!(batch.src.row(0).to_vec(), want);
    }

    #[test]
    fn target_needing_more_than_bucket_truncates() {
        let hp = hp_with(vec![(5, 10)], 1);
        let tgt: Vec<usize> = (50..59).collect(); // |tgt| = 9, 9 + 2 > 10
        let batch = prepare_batch(&[(vec![4], tgt)], &hp).unwrap();
        // Kept 8 target tokens + EOS.
        assert_eq!(batch.mask.row(0).iter().sum::<f64>(), 9.0);
        assert_eq!(batch.tgt_output[[0, 8]], EOS);
        assert_eq!(batch.tgt_output[[0, 7]], 57);
    }

    #[test]
    fn picks_smallest_fitting_bucket_for_whole_batch() {
        let hp = hp_with(vec![(5, 10), (10, 15)], 2);
        let pairs = vec![(vec![4, 4], vec![9]), (vec![4; 7], vec![9])];
        let batch = prepare_batch(&pairs, &hp).unwrap();
        assert_eq!(batch.bucket, 1);
    }

    #[test]
    fn empty_batch_is_error() {
        let hp = hp_with(vec![(5, 10)], 1);
        assert!(prepare_batch(&[], &hp).is_err());
    }
}
