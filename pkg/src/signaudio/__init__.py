"""signaudio: streaming sign-gesture detection and direct audio synthesis.

The package turns a stream of video frames into audible speech without a
text step: a sliding-window detector picks out gesture occurrences by
temporal non-maximal suppression of classifier confidences, a learned
generator maps pooled visual features to a complex spectrogram, and an
inverse short-time Fourier transform renders the waveform.  A metric suite
(STOI, SNR, MCD, WER and friends) scores the result.
"""

__version__ = "0.1.0"
