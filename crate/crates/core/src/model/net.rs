use super::params::BoundParams;
use crate::autodiff::{NodeId, Tape, Tensor};
use crate::corpus::EncodedExample;
use crate::error::{Error, Result};
use crate::tokenizer::UNK_ID;

/// Encoder states and decoder-initialization nodes for one source sequence.
/// The attention and copy key matrices depend only on the encoder, so they
/// are computed here once rather than at every decoder step.
pub struct EncoderOutput {
    /// `[Ts, Hd]`; rows at padded positions are exactly zero.
    pub hidden: NodeId,
    /// `H · W_h`, `[Ts, Hd]`.
    pub attn_keys: NodeId,
    /// `tanh(H · W_c)`, `[Ts, Hd]`; present iff the copy head is on.
    pub copy_keys: Option<NodeId>,
    /// `[Ts]` leaf, 1.0 at real positions.
    pub mask_node: NodeId,
    pub mask: Vec<f64>,
    pub init_h: NodeId,
    pub init_c: NodeId,
    pub len: usize,
}

/// Recurrent decoder state between steps.
#[derive(Debug, Clone)]
pub struct DecoderState {
    pub hidden: NodeId,
    pub cell: NodeId,
    /// Selective-read vector; a zero node when the copy head is off or the
    /// previous token matched no source position.
    pub selective_read: NodeId,
}

/// One LSTM cell step with combined gate weights `[4h, in+h]`, gate order
/// i, f, g, o.
pub fn lstm_step(
    tape: &mut Tape,
    w: NodeId,
    b: NodeId,
    x: NodeId,
    h: NodeId,
    c: NodeId,
) -> Result<(NodeId, NodeId)> {
    let hidden = tape.value(h).len();
    let xh = tape.concat(&[x, h])?;
    let pre = tape.matmul(w, xh)?;
    let pre = tape.add(pre, b)?;
    let i_gate = tape.slice(pre, 0, hidden)?;
    let f_gate = tape.slice(pre, hidden, hidden)?;
    let g_gate = tape.slice(pre, 2 * hidden, hidden)?;
    let o_gate = tape.slice(pre, 3 * hidden, hidden)?;
    let i_gate = tape.sigmoid(i_gate);
    let f_gate = tape.sigmoid(f_gate);
    let g_gate = tape.tanh(g_gate);
    let o_gate = tape.sigmoid(o_gate);
    let keep = tape.mul(f_gate, c)?;
    let write = tape.mul(i_gate, g_gate)?;
    let c_next = tape.add(keep, write)?;
    let c_act = tape.tanh(c_next);
    let h_next = tape.mul(o_gate, c_act)?;
    Ok((h_next, c_next))
}

fn run_direction(
    tape: &mut Tape,
    bound: &BoundParams,
    prefix: &str,
    embedded: &[NodeId],
    reverse: bool,
) -> Result<(Vec<NodeId>, NodeId, NodeId)> {
    let he = bound.config.encoder_hidden_dim;
    let w = bound.id(&format!("{prefix}.w"));
    let b = bound.id(&format!("{prefix}.b"));
    let mut h = tape.leaf(Tensor::zeros(&[he]));
    let mut c = tape.leaf(Tensor::zeros(&[he]));
    let mut states = vec![NodeId(0); embedded.len()];
    let order: Vec<usize> = if reverse {
        (0..embedded.len()).rev().collect()
    } else {
        (0..embedded.len()).collect()
    };
    for j in order {
        let (h2, c2) = lstm_step(tape, w, b, embedded[j], h, c)?;
        h = h2;
        c = c2;
        states[j] = h;
    }
    Ok((states, h, c))
}

/// Runs the (bi)directional encoder LSTM over the unpadded prefix of
/// `source_ids`, projects per-position states to decoder width and derives
/// the decoder's initial state. The mask must be a contiguous run of ones
/// followed by zeros; padded rows come out as exact zero vectors, and the
/// mask removes them from every downstream attention/copy score.
pub fn encode_source(
    tape: &mut Tape,
    bound: &BoundParams,
    source_ids: &[u32],
    mask: &[f64],
) -> Result<EncoderOutput> {
    if source_ids.len() != mask.len() {
        return Err(Error::ShapeMismatch {
            op: "encode_source",
            left: vec![source_ids.len()],
            right: vec![mask.len()],
        });
    }
    let real_len = mask.iter().take_while(|&&m| m != 0.0).count();
    if mask[real_len..].iter().any(|&m| m != 0.0) {
        return Err(Error::InconsistentOovMap {
            message: "source mask must be a contiguous prefix of ones".to_string(),
        });
    }
    if real_len == 0 {
        return Err(Error::EmptySource);
    }

    let emb_table = bound.id("embedding.source");
    let embedded: Vec<NodeId> = source_ids[..real_len]
        .iter()
        .map(|&id| tape.row_lookup(emb_table, id as usize))
        .collect::<Result<_>>()?;

    let (fwd_states, fwd_h, fwd_c) = run_direction(tape, bound, "encoder.fwd", &embedded, false)?;
    let (cat_rows, final_h, final_c) = if bound.config.bidirectional_encoder {
        let (bwd_states, bwd_h, bwd_c) =
            run_direction(tape, bound, "encoder.bwd", &embedded, true)?;
        let rows: Vec<NodeId> = fwd_states
            .iter()
            .zip(&bwd_states)
            .map(|(&f, &bk)| tape.concat(&[f, bk]))
            .collect::<Result<_>>()?;
        let fh = tape.concat(&[fwd_h, bwd_h])?;
        let fc = tape.concat(&[fwd_c, bwd_c])?;
        (rows, fh, fc)
    } else {
        (fwd_states, fwd_h, fwd_c)
    };

    let stacked = tape.stack_rows(&cat_rows)?;
    let proj_w = bound.id("encoder.proj.w");
    let proj_b = bound.id("encoder.proj.b");
    let projected = tape.matmul(stacked, proj_w)?;
    let projected = tape.add(projected, proj_b)?;

    let hidden = if real_len == source_ids.len() {
        projected
    } else {
        tape.pad_rows(projected, source_ids.len())?
    };

    let init_h = affine_tanh(tape, bound, "encoder.init_h", final_h)?;
    let init_c = affine_tanh(tape, bound, "encoder.init_c", final_c)?;

    let attn_keys = tape.matmul(hidden, bound.id("attention.w_h"))?;
    let copy_keys = if bound.config.use_copy {
        let keyed = tape.matmul(hidden, bound.id("copy.w"))?;
        Some(tape.tanh(keyed))
    } else {
        None
    };

    let mask_node = tape.leaf(Tensor::vector(mask.to_vec()));
    Ok(EncoderOutput {
        hidden,
        attn_keys,
        copy_keys,
        mask_node,
        mask: mask.to_vec(),
        init_h,
        init_c,
        len: source_ids.len(),
    })
}

fn affine_tanh(
    tape: &mut Tape,
    bound: &BoundParams,
    prefix: &str,
    x: NodeId,
) -> Result<NodeId> {
    let w = bound.id(&format!("{prefix}.w"));
    let b = bound.id(&format!("{prefix}.b"));
    let y = tape.matmul(w, x)?;
    let y = tape.add(y, b)?;
    Ok(tape.tanh(y))
}

/// Additive attention: `e_j = v · tanh(W_s s + W_h h_j)`, masked softmax over
/// positions, context as the weight-averaged encoder state.
pub fn attention(
    tape: &mut Tape,
    bound: &BoundParams,
    s_prev: NodeId,
    enc: &EncoderOutput,
) -> Result<(NodeId, NodeId)> {
    let ws = bound.id("attention.w_s");
    let v = bound.id("attention.v");
    let query = tape.matmul(ws, s_prev)?;
    let pre = tape.add(enc.attn_keys, query)?;
    let act = tape.tanh(pre);
    let scores = tape.matmul(act, v)?;
    let masked = tape.masked_fill(scores, enc.mask_node)?;
    let alpha = tape.softmax_lastdim(masked);
    let context = tape.matmul(alpha, enc.hidden)?;
    Ok((alpha, context))
}

/// Initial decoder state derived from the encoder's final states, with a
/// zero selective-read vector.
pub fn initial_state(tape: &mut Tape, bound: &BoundParams, enc: &EncoderOutput) -> DecoderState {
    let zeta = tape.leaf(Tensor::zeros(&[bound.config.decoder_hidden_dim]));
    DecoderState {
        hidden: enc.init_h,
        cell: enc.init_c,
        selective_read: zeta,
    }
}

/// Shared normalization of generate and copy scores. Probability mass of
/// source positions pools onto their outcome id (vocabulary id for known
/// tokens, extended id otherwise), so duplicated source tokens reinforce one
/// outcome. Returns a distribution node over `vocab_size + n_extended`.
pub fn joint_distribution(
    tape: &mut Tape,
    psi_g: NodeId,
    psi_c_masked: NodeId,
    outcome_of_position: &[Option<u32>],
    vocab_size: usize,
    n_extended: usize,
) -> Result<NodeId> {
    let all_scores = tape.concat(&[psi_g, psi_c_masked])?;
    let q = tape.softmax_lastdim(all_scores);
    let mut groups: Vec<Vec<usize>> = (0..vocab_size + n_extended)
        .map(|y| if y < vocab_size { vec![y] } else { vec![] })
        .collect();
    for (j, outcome) in outcome_of_position.iter().enumerate() {
        if let Some(y) = outcome {
            groups[*y as usize].push(vocab_size + j);
        }
    }
    tape.group_sum(q, groups)
}

/// One decoder step: attention over the encoder states, an LSTM update fed
/// `[embed(prev); context; selective_read]`, and the output distribution.
///
/// With the copy head on, generate scores over the vocabulary and copy
/// scores over unmasked source positions share one normalization, and the
/// new state's selective-read vector is the copy-score-weighted average of
/// encoder states at positions whose token equals `prev_token_id` (zero when
/// none match). Extended previous ids embed as UNK; their information enters
/// through the selective read.
///
/// Without the copy head, the distribution is a plain softmax over the
/// vocabulary and every extended outcome has probability exactly 0.
pub fn decoder_step(
    tape: &mut Tape,
    bound: &BoundParams,
    state: &DecoderState,
    prev_token_id: u32,
    enc: &EncoderOutput,
    example: &EncodedExample,
) -> Result<(DecoderState, NodeId)> {
    let vocab_size = bound.config.vocab_size;
    let n_extended = example.oov_map.len();
    let support = vocab_size + n_extended;
    if (prev_token_id as usize) >= support {
        return Err(Error::TargetOutOfSupport {
            id: prev_token_id,
            support,
        });
    }
    let real_len = enc.mask.iter().filter(|&&m| m != 0.0).count();
    if real_len != example.source_ids.len() {
        return Err(Error::InconsistentOovMap {
            message: format!(
                "encoder covers {real_len} real positions vs example source length {}",
                example.source_ids.len()
            ),
        });
    }

    // Outcome id per source position; None at padding.
    let outcomes: Vec<Option<u32>> = (0..enc.len)
        .map(|j| {
            if enc.mask[j] == 0.0 {
                return Ok(None);
            }
            let id = example.source_ids[j];
            if id == UNK_ID {
                example
                    .extended_id_of(&example.source_tokens[j])
                    .map(Some)
                    .ok_or_else(|| Error::InconsistentOovMap {
                        message: format!(
                            "source token {:?} at position {j} missing from the map",
                            example.source_tokens[j]
                        ),
                    })
            } else {
                Ok(Some(id))
            }
        })
        .collect::<Result<_>>()?;

    let (_alpha, context) = attention(tape, bound, state.hidden, enc)?;

    let emb_table = bound.id("embedding.target");
    let emb_id = if (prev_token_id as usize) < vocab_size {
        prev_token_id
    } else {
        UNK_ID
    };
    let embedded = tape.row_lookup(emb_table, emb_id as usize)?;

    let x = if bound.config.use_copy {
        tape.concat(&[embedded, context, state.selective_read])?
    } else {
        tape.concat(&[embedded, context])?
    };
    let w = bound.id("decoder.lstm.w");
    let b = bound.id("decoder.lstm.b");
    let (s_next, c_next) = lstm_step(tape, w, b, x, state.hidden, state.cell)?;

    let gen_w = bound.id("generate.w");
    let gen_b = bound.id("generate.b");
    let psi_g = tape.matmul(gen_w, s_next)?;
    let psi_g = tape.add(psi_g, gen_b)?;

    if !bound.config.use_copy {
        let probs = tape.softmax_lastdim(psi_g);
        let dist = if n_extended == 0 {
            probs
        } else {
            let zeros = tape.leaf(Tensor::zeros(&[n_extended]));
            tape.concat(&[probs, zeros])?
        };
        let new_state = DecoderState {
            hidden: s_next,
            cell: c_next,
            selective_read: state.selective_read,
        };
        return Ok((new_state, dist));
    }

    // Copy scores: psi_c(j) = tanh(h_j W_c) · s_t over unmasked positions.
    let keyed = enc.copy_keys.expect("copy keys exist when use_copy is on");
    let psi_c = tape.matmul(keyed, s_next)?;
    let psi_c_masked = tape.masked_fill(psi_c, enc.mask_node)?;

    let dist = joint_distribution(tape, psi_g, psi_c_masked, &outcomes, vocab_size, n_extended)?;

    // Selective read for the token just consumed: softmax of copy scores
    // restricted to positions whose outcome equals it.
    let matches: Vec<usize> = outcomes
        .iter()
        .enumerate()
        .filter_map(|(j, o)| (*o == Some(prev_token_id)).then_some(j))
        .collect();
    let selective_read = if matches.is_empty() {
        tape.leaf(Tensor::zeros(&[bound.config.decoder_hidden_dim]))
    } else {
        let sub_scores = tape.gather(psi_c_masked, &matches)?;
        let rho = tape.softmax_lastdim(sub_scores);
        let rows = tape.gather_rows(enc.hidden, &matches)?;
        tape.matmul(rho, rows)?
    };

    let new_state = DecoderState {
        hidden: s_next,
        cell: c_next,
        selective_read,
    };
    Ok((new_state, dist))
}
