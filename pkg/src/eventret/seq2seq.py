"""A small autoregressive encoder-decoder trained to emit identifier tokens.

Architecture: stacked GRU encoder, stacked GRU decoder with additive
attention over the top encoder states, and a softmax over the identifier
vocabulary. Everything is plain numpy (float64) with hand-written backward
passes, so gradients are exact and checkable against finite differences.

Shapes use B = batch, Ti = input length, To = target length, E = embed_dim,
H = hidden_dim, A = attention_dim, V = identifier vocab size.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import DivergenceError, MissingIdentifier
from .identifiers import END_OF_IDENTIFIER
from .textutil import tokenize

PAD, BOS, EOS, UNK = 0, 1, 2, 3
SPECIALS = ("<pad>", "<s>", END_OF_IDENTIFIER, "<unk>")


@dataclass(frozen=True)
class Vocab:
    """Input-token and identifier-token id maps; specials sit at ids 0..3."""

    input_tokens: tuple[str, ...]
    identifier_tokens: tuple[str, ...]

    def __post_init__(self):
        if self.input_tokens[:4] != SPECIALS or self.identifier_tokens[:4] != SPECIALS:
            raise ValueError("vocab must start with the four special tokens")
        object.__setattr__(self, "_input_ids", {t: i for i, t in enumerate(self.input_tokens)})
        object.__setattr__(self, "_identifier_ids", {t: i for i, t in enumerate(self.identifier_tokens)})

    @property
    def input_size(self) -> int:
        return len(self.input_tokens)

    @property
    def identifier_size(self) -> int:
        return len(self.identifier_tokens)

    def encode_input(self, text: str, max_len: int | None = None) -> list[int]:
        tokens = tokenize(text, lowercase=True)
        if max_len is not None:
            tokens = tokens[:max_len]
        ids = [self._input_ids.get(t, UNK) for t in tokens]
        return ids or [UNK]

    def identifier_id(self, token: str) -> int:
        try:
            return self._identifier_ids[token]
        except KeyError:
            raise KeyError(f"identifier token {token!r} not in vocab") from None

    def encode_identifier(self, tokens) -> list[int]:
        """Token ids followed by the end-of-identifier sentinel."""
        return [self.identifier_id(t) for t in tokens] + [EOS]

    def decode_identifier(self, ids) -> list[str]:
        return [self.identifier_tokens[i] for i in ids if i != EOS]


def build_vocab(units, index) -> Vocab:
    """Input vocab from the unit texts; identifier vocab from the index."""
    if not units:
        raise ValueError("cannot build a vocab from zero units")
    seen: set[str] = set()
    for unit in units:
        seen.update(tokenize(unit.input_text, lowercase=True))
    input_tokens = SPECIALS + tuple(sorted(seen))
    identifier_tokens = SPECIALS + tuple(t for t in index.vocabulary if t not in SPECIALS)
    return Vocab(input_tokens=input_tokens, identifier_tokens=identifier_tokens)


@dataclass(frozen=True)
class ModelConfig:
    embed_dim: int = 32
    hidden_dim: int = 64
    attention_dim: int = 48
    encoder_layers: int = 1
    decoder_layers: int = 1
    max_input_len: int = 64
    init_seed: int = 0
    init_scale: float = 0.08

    def __post_init__(self):
        for name in ("embed_dim", "hidden_dim", "attention_dim", "encoder_layers",
                     "decoder_layers", "max_input_len"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")


@dataclass
class TrainConfig:
    learning_rate: float = 1.5
    batch_size: int = 16
    epochs: int = 120
    clip_norm: float = 5.0
    shuffle_seed: int = 7
    optimizer: str = "sgd"  # "sgd" (reference) or "adam"

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


# -- parameters ----------------------------------------------------------------

def _param_shapes(vocab: Vocab, config: ModelConfig) -> list[tuple[str, tuple[int, ...]]]:
    E, H, A = config.embed_dim, config.hidden_dim, config.attention_dim
    shapes: list[tuple[str, tuple[int, ...]]] = [("enc_embed", (vocab.input_size, E))]
    for layer in range(config.encoder_layers):
        d_in = E if layer == 0 else H
        shapes += [
            (f"enc{layer}_W", (d_in, 3 * H)),
            (f"enc{layer}_U", (H, 3 * H)),
            (f"enc{layer}_b", (3 * H,)),
        ]
    shapes += [
        ("att_W", (H, A)),
        ("att_U", (H, A)),
        ("att_b", (A,)),
        ("att_v", (A,)),
        ("dec_embed", (vocab.identifier_size, E)),
    ]
    for layer in range(config.decoder_layers):
        d_in = E + H if layer == 0 else H
        shapes += [
            (f"dec{layer}_W", (d_in, 3 * H)),
            (f"dec{layer}_U", (H, 3 * H)),
            (f"dec{layer}_b", (3 * H,)),
        ]
    shapes += [("out_W", (2 * H, vocab.identifier_size)), ("out_b", (vocab.identifier_size,))]
    return shapes


class Seq2SeqModel:
    def __init__(self, vocab: Vocab, config: ModelConfig, params: dict[str, np.ndarray]):
        self.vocab = vocab
        self.config = config
        self.params = params

    @classmethod
    def create(cls, vocab: Vocab, config: ModelConfig) -> "Seq2SeqModel":
        rng = np.random.default_rng(config.init_seed)
        params = {}
        for name, shape in _param_shapes(vocab, config):
            if name.endswith("_b") or name == "out_b":
                params[name] = np.zeros(shape)
            else:
                params[name] = rng.uniform(-config.init_scale, config.init_scale, size=shape)
        return cls(vocab, config, params)

    def num_params(self) -> int:
        return sum(p.size for p in self.params.values())

    def encode_text(self, text: str) -> list[int]:
        return self.vocab.encode_input(text, max_len=self.config.max_input_len)

    def zero_grads(self) -> dict[str, np.ndarray]:
        return {name: np.zeros_like(p) for name, p in self.params.items()}


# -- cells ---------------------------------------------------------------------

def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def _gru_forward_step(params, prefix, x, h_prev):
    """x [B,Din], h_prev [B,H] -> h [B,H], cache."""
    H = h_prev.shape[1]
    gi = x @ params[f"{prefix}_W"] + params[f"{prefix}_b"]
    gh = h_prev @ params[f"{prefix}_U"]
    z = _sigmoid(gi[:, :H] + gh[:, :H])
    r = _sigmoid(gi[:, H:2 * H] + gh[:, H:2 * H])
    a = gh[:, 2 * H:]
    n = np.tanh(gi[:, 2 * H:] + r * a)
    h = (1.0 - z) * n + z * h_prev
    return h, (x, h_prev, z, r, a, n)


def _gru_backward_step(params, grads, prefix, cache, dh):
    """Backprop one cell step; returns (dx, dh_prev)."""
    x, h_prev, z, r, a, n = cache
    dz = dh * (h_prev - n)
    dn = dh * (1.0 - z)
    dh_prev = dh * z
    dn_pre = dn * (1.0 - n * n)
    dr = dn_pre * a
    da = dn_pre * r
    dz_pre = dz * z * (1.0 - z)
    dr_pre = dr * r * (1.0 - r)
    dgi = np.concatenate([dz_pre, dr_pre, dn_pre], axis=1)
    dgh = np.concatenate([dz_pre, dr_pre, da], axis=1)
    grads[f"{prefix}_W"] += x.T @ dgi
    grads[f"{prefix}_b"] += dgi.sum(axis=0)
    grads[f"{prefix}_U"] += h_prev.T @ dgh
    dx = dgi @ params[f"{prefix}_W"].T
    dh_prev = dh_prev + dgh @ params[f"{prefix}_U"].T
    return dx, dh_prev


def _log_softmax(logits):
    m = logits.max(axis=-1, keepdims=True)
    shifted = logits - m
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


# -- full forward / backward ----------------------------------------------------

def _encode_batch(model, X, mask):
    """Run the encoder stack. Returns (H_top [B,Ti,H], finals per layer, caches)."""
    params, config = model.params, model.config
    B, Ti = X.shape
    emb = params["enc_embed"][X]  # [B,Ti,E]
    layer_in = emb
    finals = []
    caches = []
    Hd = config.hidden_dim
    for layer in range(config.encoder_layers):
        h = np.zeros((B, Hd))
        outs = np.empty((B, Ti, Hd))
        layer_cache = []
        for t in range(Ti):
            h_cell, cache = _gru_forward_step(params, f"enc{layer}", layer_in[:, t], h)
            m = mask[:, t][:, None]
            h = m * h_cell + (1.0 - m) * h
            outs[:, t] = h
            layer_cache.append(cache)
        finals.append(h)
        caches.append(layer_cache)
        layer_in = outs
    return layer_in, finals, (emb, caches)


def _attend(params, H_top, HWa, src_mask, s_att):
    """Additive attention. Returns (context [B,H], cache)."""
    q = s_att @ params["att_U"] + params["att_b"]  # [B,A]
    u = np.tanh(HWa + q[:, None, :])  # [B,Ti,A]
    e = u @ params["att_v"]  # [B,Ti]
    e = np.where(src_mask, e, -1e30)
    alpha_ = np.exp(e - e.max(axis=1, keepdims=True))
    alpha = alpha_ / alpha_.sum(axis=1, keepdims=True)
    c = (alpha[:, :, None] * H_top).sum(axis=1)  # [B,H]
    return c, (s_att, u, alpha)


def _attend_backward(params, grads, H_top, src_mask, cache, dc, dH_top, dHWa):
    """Backprop attention; accumulates into dH_top/dHWa, returns ds_att."""
    s_att, u, alpha = cache
    dalpha = (dc[:, None, :] * H_top).sum(axis=2)  # [B,Ti]
    dH_top += alpha[:, :, None] * dc[:, None, :]
    dot = (dalpha * alpha).sum(axis=1, keepdims=True)
    de = alpha * (dalpha - dot)
    de = np.where(src_mask, de, 0.0)
    du = de[:, :, None] * params["att_v"][None, None, :]
    du_pre = du * (1.0 - u * u)
    dHWa += du_pre
    dq = du_pre.sum(axis=1)  # [B,A]
    grads["att_v"] += (u * de[:, :, None]).sum(axis=(0, 1))
    grads["att_b"] += dq.sum(axis=0)
    grads["att_U"] += s_att.T @ dq
    return dq @ params["att_U"].T


def _decoder_init_states(model, enc_finals, B):
    Hd = model.config.hidden_dim
    states = []
    for layer in range(model.config.decoder_layers):
        if layer < len(enc_finals):
            states.append(enc_finals[layer])
        else:
            states.append(np.zeros((B, Hd)))
    return states


def _forward_batch(model, X, Xmask, Yin, want_cache):
    """Teacher-forced forward pass.

    Returns (logp [B,To,V], cache). Yin holds BOS-shifted decoder inputs.
    """
    params, config = model.params, model.config
    B, To = Yin.shape
    H_top, enc_finals, enc_cache = _encode_batch(model, X, Xmask)
    HWa = H_top @ params["att_W"]  # [B,Ti,A]
    states = _decoder_init_states(model, enc_finals, B)

    logps = np.empty((B, To, model.vocab.identifier_size))
    step_caches = []
    for t in range(To):
        c, att_cache = _attend(params, H_top, HWa, Xmask, states[-1])
        emb = params["dec_embed"][Yin[:, t]]  # [B,E]
        x = np.concatenate([emb, c], axis=1)
        layer_caches = []
        new_states = []
        for layer in range(config.decoder_layers):
            h, cache = _gru_forward_step(params, f"dec{layer}", x, states[layer])
            layer_caches.append(cache)
            new_states.append(h)
            x = h
        states = new_states
        o = np.concatenate([states[-1], c], axis=1)  # [B,2H]
        logits = o @ params["out_W"] + params["out_b"]
        logps[:, t] = _log_softmax(logits)
        if want_cache:
            step_caches.append((att_cache, layer_caches, o))
    cache = (H_top, HWa, enc_cache, step_caches, X, Xmask, Yin) if want_cache else None
    return logps, cache


def _backward_batch(model, logps, cache, Ytgt, Ymask, scale):
    """Backprop d(loss)/d(params) where loss = scale * sum of masked NLL."""
    params, config = model.params, model.config
    H_top, HWa, enc_cache, step_caches, X, Xmask, Yin = cache
    B, To, V = logps.shape
    E, Hd = config.embed_dim, config.hidden_dim
    grads = model.zero_grads()

    dH_top = np.zeros_like(H_top)
    dHWa = np.zeros_like(HWa)
    ds_carry = [np.zeros((B, Hd)) for _ in range(config.decoder_layers)]

    for t in range(To - 1, -1, -1):
        att_cache, layer_caches, o = step_caches[t]
        probs = np.exp(logps[:, t])
        dlogits = probs * Ymask[:, t][:, None]
        rows = np.arange(B)
        dlogits[rows, Ytgt[:, t]] -= Ymask[:, t]
        dlogits *= scale
        grads["out_W"] += o.T @ dlogits
        grads["out_b"] += dlogits.sum(axis=0)
        do = dlogits @ params["out_W"].T
        dc = do[:, Hd:].copy()

        ds = [g.copy() for g in ds_carry]
        ds[-1] += do[:, :Hd]
        dx = None
        for layer in range(config.decoder_layers - 1, -1, -1):
            if dx is not None:
                ds[layer] += dx
            dx, dh_prev = _gru_backward_step(params, grads, f"dec{layer}", layer_caches[layer], ds[layer])
            ds_carry[layer] = dh_prev
        demb = dx[:, :E]
        dc += dx[:, E:]
        np.add.at(grads["dec_embed"], Yin[:, t], demb)

        ds_att = _attend_backward(params, grads, H_top, Xmask, att_cache, dc, dH_top, dHWa)
        ds_carry[-1] += ds_att

    # Attention key projection: HWa = H_top @ att_W.
    grads["att_W"] += np.einsum("bth,bta->ha", H_top, dHWa)
    dH_top += dHWa @ params["att_W"].T

    # Decoder initial states came from the encoder finals, layer for layer.
    emb, enc_caches = enc_cache
    Ti = X.shape[1]
    dfinals = [np.zeros((B, Hd)) for _ in range(config.encoder_layers)]
    for layer in range(min(config.decoder_layers, config.encoder_layers)):
        dfinals[layer] += ds_carry[layer]

    dlayer_out = dH_top
    for layer in range(config.encoder_layers - 1, -1, -1):
        d_in = E if layer == 0 else Hd
        dx_seq = np.zeros((B, Ti, d_in))
        dh_carry = dfinals[layer]
        for t in range(Ti - 1, -1, -1):
            dh = dlayer_out[:, t] + dh_carry
            m = Xmask[:, t][:, None]
            dh_cell = m * dh
            dh_skip = (1.0 - m) * dh
            dx, dh_prev = _gru_backward_step(params, grads, f"enc{layer}", enc_caches[layer][t], dh_cell)
            dx_seq[:, t] = dx
            dh_carry = dh_skip + dh_prev
        dlayer_out = dx_seq
    np.add.at(grads["enc_embed"], X, dlayer_out)
    return grads


# -- public operations -----------------------------------------------------------

def _pad_batch(examples):
    """examples: list of (input_ids, target_ids). Targets already end in EOS."""
    B = len(examples)
    Ti = max(len(x) for x, _ in examples)
    To = max(len(y) for _, y in examples)
    X = np.full((B, Ti), PAD, dtype=int)
    Xmask = np.zeros((B, Ti), dtype=bool)
    Yin = np.full((B, To), PAD, dtype=int)
    Ytgt = np.full((B, To), PAD, dtype=int)
    Ymask = np.zeros((B, To))
    for i, (x, y) in enumerate(examples):
        X[i, :len(x)] = x
        Xmask[i, :len(x)] = True
        Yin[i, 0] = BOS
        Yin[i, 1:len(y)] = y[:-1]
        Ytgt[i, :len(y)] = y
        Ymask[i, :len(y)] = 1.0
    return X, Xmask, Yin, Ytgt, Ymask


def step_logprobs(model, input_ids, prefix_ids) -> np.ndarray:
    """Log-probabilities over the identifier vocab for the next token.

    prefix_ids are the identifier token ids generated so far (no BOS).
    """
    session = DecodeSession(model, input_ids)
    states = [session.initial_state()]
    prev = np.array([BOS])
    logp = None
    for token_id in list(prefix_ids) + [None]:
        logp, states = session.step(states, prev)
        if token_id is None:
            break
        prev = np.array([token_id])
    return logp[0]


def sequence_logprob(model, input_ids, identifier_tokens) -> float:
    """Sum of gold-token log-probs, including the terminating sentinel."""
    target = model.vocab.encode_identifier(identifier_tokens)
    session = DecodeSession(model, input_ids)
    states = [session.initial_state()]
    prev = np.array([BOS])
    total = 0.0
    for token_id in target:
        logp, states = session.step(states, prev)
        total += float(logp[0, token_id])
        prev = np.array([token_id])
    return total


def units_to_examples(units, vocab, index, max_input_len):
    examples = []
    for unit in units:
        ident = index.identifier_for(unit.doc_id)
        if ident is None:
            raise MissingIdentifier(f"unit for doc {unit.doc_id!r} has no identifier")
        x = vocab.encode_input(unit.input_text, max_len=max_input_len)
        y = vocab.encode_identifier(ident.tokens)
        examples.append((x, y))
    return examples


def loss(model, units, index):
    """Mean negative sequence log-prob over the units, with exact gradients."""
    examples = units_to_examples(units, model.vocab, index, model.config.max_input_len)
    return _loss_on_examples(model, examples)


def _loss_on_examples(model, examples, want_grads=True):
    X, Xmask, Yin, Ytgt, Ymask = _pad_batch(examples)
    logps, cache = _forward_batch(model, X, Xmask, Yin, want_cache=want_grads)
    B = len(examples)
    rows = np.arange(B)[:, None]
    gold = logps[rows, np.arange(Ytgt.shape[1])[None, :], Ytgt]
    value = float(-(gold * Ymask).sum() / B)
    if not want_grads:
        return value, None
    grads = _backward_batch(model, logps, cache, Ytgt, Ymask, scale=1.0 / B)
    return value, grads


def _global_norm(grads) -> float:
    return float(np.sqrt(sum(float((g * g).sum()) for g in grads.values())))


def train(model, units, index, config: TrainConfig):
    """Minibatch gradient descent on the multi-task unit set.

    All units are shuffled together each epoch (seeded). Returns the model and
    the per-epoch mean loss trace.
    """
    if not units:
        raise ValueError("cannot train on zero units")
    examples = units_to_examples(units, model.vocab, index, model.config.max_input_len)
    rng = np.random.default_rng(config.shuffle_seed)
    adam_m = adam_v = None
    adam_t = 0
    if config.optimizer == "adam":
        adam_m = model.zero_grads()
        adam_v = model.zero_grads()
    trace = []
    for epoch in range(config.epochs):
        order = rng.permutation(len(examples))
        epoch_loss = 0.0
        n_batches = 0
        for start in range(0, len(examples), config.batch_size):
            batch = [examples[i] for i in order[start:start + config.batch_size]]
            value, grads = _loss_on_examples(model, batch)
            if not np.isfinite(value):
                raise DivergenceError(epoch, n_batches, value)
            norm = _global_norm(grads)
            if config.clip_norm > 0 and norm > config.clip_norm:
                factor = config.clip_norm / norm
                for g in grads.values():
                    g *= factor
            if config.optimizer == "sgd":
                for name, p in model.params.items():
                    p -= config.learning_rate * grads[name]
            else:
                adam_t += 1
                b1, b2, eps = 0.9, 0.999, 1e-8
                for name, p in model.params.items():
                    adam_m[name] = b1 * adam_m[name] + (1 - b1) * grads[name]
                    adam_v[name] = b2 * adam_v[name] + (1 - b2) * grads[name] ** 2
                    m_hat = adam_m[name] / (1 - b1 ** adam_t)
                    v_hat = adam_v[name] / (1 - b2 ** adam_t)
                    p -= config.learning_rate * m_hat / (np.sqrt(v_hat) + eps)
            epoch_loss += value
            n_batches += 1
        trace.append(epoch_loss / n_batches)
    return model, trace


def greedy_decode(model, input_ids, max_len=32) -> list[int]:
    """Unconstrained argmax decode until the sentinel (for sanity checks)."""
    session = DecodeSession(model, input_ids)
    states = [session.initial_state()]
    prev = np.array([BOS])
    out = []
    for _ in range(max_len):
        logp, states = session.step(states, prev)
        token = int(logp[0].argmax())
        if token == EOS:
            break
        out.append(token)
        prev = np.array([token])
    return out


# -- incremental decoding ---------------------------------------------------------

class DecodeSession:
    """Frozen-model decoder over one encoded input.

    Hypotheses are batched: `step` takes a list of per-hypothesis states and a
    vector of previous token ids and returns next-token log-probs for all of
    them in one pass.
    """

    def __init__(self, model: Seq2SeqModel, input_ids):
        self.model = model
        params = model.params
        X = np.asarray(list(input_ids), dtype=int)[None, :]
        mask = np.ones_like(X, dtype=bool)
        H_top, finals, _ = _encode_batch(model, X, mask)
        self.H = H_top[0]  # [Ti,H]
        self.HWa = self.H @ params["att_W"]  # [Ti,A]
        self._init = tuple(f[0] for f in _decoder_init_states(model, finals, 1))

    def initial_state(self) -> tuple[np.ndarray, ...]:
        return self._init

    def step(self, states, prev_ids):
        """states: list of per-layer-state tuples, one per hypothesis."""
        params, config = self.model.params, self.model.config
        n = len(states)
        prev = np.asarray(prev_ids, dtype=int)
        S = [np.stack([st[layer] for st in states]) for layer in range(config.decoder_layers)]

        q = S[-1] @ params["att_U"] + params["att_b"]  # [n,A]
        u = np.tanh(self.HWa[None, :, :] + q[:, None, :])  # [n,Ti,A]
        e = u @ params["att_v"]  # [n,Ti]
        alpha_ = np.exp(e - e.max(axis=1, keepdims=True))
        alpha = alpha_ / alpha_.sum(axis=1, keepdims=True)
        c = alpha @ self.H  # [n,H]

        x = np.concatenate([params["dec_embed"][prev], c], axis=1)
        new_layers = []
        for layer in range(config.decoder_layers):
            h, _ = _gru_forward_step(params, f"dec{layer}", x, S[layer])
            new_layers.append(h)
            x = h
        o = np.concatenate([new_layers[-1], c], axis=1)
        logits = o @ params["out_W"] + params["out_b"]
        logp = _log_softmax(logits)
        new_states = [tuple(new_layers[layer][i] for layer in range(config.decoder_layers)) for i in range(n)]
        return logp, new_states


# -- checkpoints -------------------------------------------------------------------

CHECKPOINT_VERSION = 1


def save_checkpoint(model: Seq2SeqModel, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    meta = {
        "format_version": CHECKPOINT_VERSION,
        "config": asdict(model.config),
        "vocab": {
            "input_tokens": list(model.vocab.input_tokens),
            "identifier_tokens": list(model.vocab.identifier_tokens),
        },
    }
    arrays = {f"param/{name}": value for name, value in model.params.items()}
    arrays["meta"] = np.array(json.dumps(meta))
    with path.open("wb") as fh:
        np.savez(fh, **arrays)


def load_checkpoint(path) -> Seq2SeqModel:
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(str(data["meta"]))
        if meta.get("format_version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {meta.get('format_version')!r}")
        vocab = Vocab(
            input_tokens=tuple(meta["vocab"]["input_tokens"]),
            identifier_tokens=tuple(meta["vocab"]["identifier_tokens"]),
        )
        config = ModelConfig(**meta["config"])
        params = {
            key[len("param/"):]: data[key].copy() for key in data.files if key.startswith("param/")
        }
    return Seq2SeqModel(vocab, config, params)
