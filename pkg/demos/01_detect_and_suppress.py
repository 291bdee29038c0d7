"""
Temporal detection by non-maximum suppression
==============================================

A stream of video frames slides through a fixed-size window buffer.  Every
few positions the extractor scores the current window with per-class
confidences, and the detector keeps only the single best window out of
each burst of high scores.  This script walks one synthetic burst pattern
through the detector and shows exactly when and why emissions happen.
"""

import numpy as np

from signaudio.nms import NmsParams, NmsState, simulate_positions


# 1. A confidence trace with three bursts.
#
# Window positions are numbered from 1.  We plant clear peaks at positions
# 4, 11 and 19 and keep everything else just below the threshold, with a
# couple of rising shoulders so the best-so-far logic has work to do.

trace = [0.5] * 22
trace[2] = 0.72          # shoulder before the first peak
trace[3] = 0.93          # first sign, best at position 4
trace[9] = 0.75
trace[10] = 0.88         # second sign, best at position 11
trace[17] = 0.71
trace[18] = 0.96         # third sign, best at position 19

params = NmsParams(window_size=6, hop=1, overlap=3, threshold=0.7)
print(f"window_size={params.window_size}  hop={params.hop}  "
      f"overlap={params.overlap}  threshold={params.threshold}")
print(f"suppression span: positions closer than "
      f"window_size - overlap = {params.window_size - params.overlap} merge\n")

# 2. The one-call answer.

positions = simulate_positions(trace, params)
print(f"confidence trace : {trace}")
print(f"emitted positions: {positions}\n")

# 3. The same run, frame by frame, to see the machinery.
#
# The state machine consumes raw frames.  The buffer needs window_size
# frames before position 1 exists, so a trace of N positions corresponds
# to window_size - 1 + N frames.  Here the frames are just integers; a
# scripted source serves the planted confidences.


class TraceSource:
    def __init__(self, values):
        self.values = values

    def extract(self, window, window_index):
        conf = np.array([self.values[window_index - 1], 0.1], dtype=np.float32)
        phi = np.zeros(4, dtype=np.float32)
        return phi, conf


state = NmsState(params)
source = TraceSource(trace)
frame_count = params.window_size - 1 + len(trace)

for frame in range(frame_count):
    emitted = state.push(frame, source)
    if state.t >= 1:
        best = state.t_best if state.t_best is not None else "-"
        line = f"position {state.t:2d}  best-so-far {best}"
        if emitted is not None:
            line += (f"  -> EMIT position {emitted.emitted_at} "
                     f"(peak {emitted.max_confidence:.2f})")
        print(line)

tail = state.flush()
if tail is not None:
    print(f"end of stream        -> EMIT position {tail.emitted_at} "
          f"(peak {tail.max_confidence:.2f})  [flush]")

# 4. Why position 11 wins its burst: position 10 scored 0.75 and became
# the provisional best, then position 11 scored 0.88 and replaced it.
# Nothing beat 0.88 afterwards, and at position 15 the gap since the best
# exceeded the suppression span, so the burst was over and the best was
# emitted.  The final best is only handed back by flush(), because nothing
# after the last frame can push it out.
