"""Monte Carlo simulation of the honest credit-card protocol.

Issuance draws uniform key and basis bits; verification measures each
position in the basis dictated by the bank's challenge.  Detection is
simulated at the Poisson-click level: a threshold detector seeing intensity
``I`` clicks with probability ``1 - exp(-eta_d * I)``, independently across
detectors, which is exactly the statistics the squashing argument assumes.

Per position with mean photon number mu:

* challenge matches the encoding basis: the full intensity mu lands on the
  detector of the key bit, the other detector stays dark;
* challenge mismatches: the intensity splits mu/2 per detector with
  independent clicks.

Double clicks are resolved to a uniformly random bit (the squashing
postprocessing); no click reports the no-detection flag.  Either way the
no-click probability is ``exp(-eta_d * mu)``, the honest loss.

Dark counts are zero and channel transmission is unity; correctness of the
ideal protocol shows up as a conditional error rate of exactly zero at
matched positions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

#: Transcript answer encoding for the no-detection flag.
NO_CLICK = -1

#: Default width multiplier of the bank's no-detection acceptance window.
KAPPA = 4.0


@dataclass(frozen=True)
class CardInstance:
    """One issued credit card: secret key and basis bits under a serial."""

    serial: str
    key_bits: np.ndarray
    basis_bits: np.ndarray
    n: int
    mu: float


@dataclass(frozen=True)
class ChallengeTranscript:
    """Outcome record of one verification round.

    ``answers`` holds one entry per position: 0 or 1 for a click, -1 for
    the no-detection flag.
    """

    challenges: np.ndarray
    answers: np.ndarray
    eta_d: float
    double_clicks: int


@dataclass(frozen=True)
class VerifyResult:
    accepted: bool
    wrong_answers: int
    no_detections: int
    expected_no_detections: float
    window: float

    @property
    def reason(self) -> str:
        if self.wrong_answers:
            return f"{self.wrong_answers} wrong matched-basis answers"
        dev = abs(self.no_detections - self.expected_no_detections)
        if dev > self.window:
            return (f"no-detection count off by {dev:.1f} "
                    f"(window {self.window:.1f})")
        return "accepted"


def issue_card(n: int, mu: float, seed: int | None = None) -> CardInstance:
    """Mint a card with uniformly random key and basis bits."""
    if n < 1:
        raise ValueError(f"card length must be >= 1, got {n}")
    if mu < 0:
        raise ValueError(f"mean photon number must be >= 0, got {mu}")
    rng = np.random.default_rng(seed)
    key = rng.integers(0, 2, size=n, dtype=np.int8)
    basis = rng.integers(0, 2, size=n, dtype=np.int8)
    serial = f"card-{rng.integers(0, 2**32):08x}"
    return CardInstance(serial=serial, key_bits=key, basis_bits=basis,
                        n=n, mu=mu)


def measure_honest(card: CardInstance, challenges: np.ndarray | None = None,
                   eta_d: float = 1.0,
                   seed: int | None = None) -> ChallengeTranscript:
    """Measure every position in the challenge basis with threshold detectors.

    ``challenges`` defaults to a uniformly random per-position choice drawn
    from the same seed stream.
    """
    if not 0 < eta_d <= 1:
        raise ValueError(f"detector efficiency must be in (0, 1], got {eta_d}")
    rng = np.random.default_rng(seed)
    n = card.n
    if challenges is None:
        challenges = rng.integers(0, 2, size=n, dtype=np.int8)
    else:
        challenges = np.asarray(challenges, dtype=np.int8)
        if challenges.shape != (n,):
            raise ValueError(f"need {n} challenges, got {challenges.shape}")

    matched = challenges == card.basis_bits
    p_full = 1.0 - np.exp(-eta_d * card.mu)
    p_half = 1.0 - np.exp(-eta_d * card.mu / 2.0)

    answers = np.full(n, NO_CLICK, dtype=np.int8)

    # Matched basis: all light on the key-bit detector.
    click = rng.random(n) < p_full
    hit = matched & click
    answers[hit] = card.key_bits[hit]

    # Mismatched basis: independent detectors at half intensity.
    click0 = rng.random(n) < p_half
    click1 = rng.random(n) < p_half
    coin = rng.integers(0, 2, size=n, dtype=np.int8)
    mis = ~matched
    single0 = mis & click0 & ~click1
    single1 = mis & ~click0 & click1
    double = mis & click0 & click1
    answers[single0] = 0
    answers[single1] = 1
    answers[double] = coin[double]

    return ChallengeTranscript(challenges=challenges, answers=answers,
                               eta_d=eta_d,
                               double_clicks=int(np.count_nonzero(double)))


def bank_verify(card: CardInstance, transcript: ChallengeTranscript,
                window: float | None = None) -> VerifyResult:
    """Accept iff matched-basis answers all equal the key and the
    no-detection count sits inside the statistical window.

    The default window is ``KAPPA * sqrt(f_h (1 - f_h) n)`` around the
    expected count ``f_h n`` (the expected-count rule is exact only
    asymptotically; the finite-n window width follows the sqrt(n)
    uncertainty scaling).
    """
    if transcript.answers.shape != (card.n,):
        raise ValueError(
            f"transcript length {transcript.answers.shape} does not match "
            f"card length {card.n}")
    f_h = float(np.exp(-transcript.eta_d * card.mu))
    expected = f_h * card.n
    if window is None:
        window = KAPPA * np.sqrt(max(f_h * (1.0 - f_h) * card.n, 1.0))

    matched = transcript.challenges == card.basis_bits
    answered = transcript.answers != NO_CLICK
    wrong = int(np.count_nonzero(
        matched & answered & (transcript.answers != card.key_bits)))
    n_vac = int(np.count_nonzero(~answered))
    ok = bool(wrong == 0 and abs(n_vac - expected) <= window)
    return VerifyResult(accepted=ok, wrong_answers=wrong,
                        no_detections=n_vac,
                        expected_no_detections=expected, window=window)
