"""Walk through the synthetic session generator.

Generates a positive raise-and-speak session and a couple of challenging
negatives, then prints their label timelines so you can see the scripted
structure: the gesture grammar, where speech lands relative to the raise,
and where the trigger onset falls.
"""

import numpy as np

from rtsfuse.sessions import GESTURE_CLASSES, Scenario
from rtsfuse.synthgen import generate_session, sample_profile

profile = sample_profile("demo-subject", np.random.default_rng(7))
print(f"subject profile: raise_speed={profile.raise_speed:.2f}, "
      f"wrist={profile.wrist}, formants={tuple(round(f) for f in profile.formants)} Hz")


def show(title, session):
    print(f"\n=== {title} ===")
    print(f"duration {session.duration:.1f}s, {session.n_ticks} ticks, "
          f"onsets {list(session.trigger_onsets)}")
    glyphs = {0: "/", 1: "^", 2: "\\", 3: "_"}  # raising raised dropping dropped
    gesture = "".join(glyphs[int(g)] for g in session.gesture_labels)
    speech = "".join("S" if s else "." for s in session.speech_labels)
    intent = "".join("!" if i else "." for i in session.intent_labels)
    print("gesture:", gesture)
    print("speech :", speech)
    print("intent :", intent)
    counts = np.bincount(session.gesture_labels, minlength=4)
    print("gesture tick counts:", dict(zip(GESTURE_CLASSES, counts.tolist())))


show("positive: sitting in a quiet room",
     generate_session(profile, Scenario("sitting", "quiet", 1), seed=[1, 0]))

show("challenge: checking the time while talking (no intent!)",
     generate_session(
         profile, Scenario("standing", "meeting", 0, challenge="check-time-talking"),
         seed=[1, 1]))

show("challenge: steering turn with loud speech (gesture stays dropped)",
     generate_session(
         profile, Scenario("driving", "crowd", 0, challenge="steering-turn-speak"),
         seed=[1, 2]))

print("\nSame profile, same seed, regenerated -> byte-identical:")
a = generate_session(profile, Scenario("walking", "park", 1), seed=[2, 0])
b = generate_session(profile, Scenario("walking", "park", 1), seed=[2, 0])
print("  audio equal:", np.array_equal(a.audio, b.audio),
      "| accel equal:", np.array_equal(a.accel, b.accel))
