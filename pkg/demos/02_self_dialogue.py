"""The self-dialogue refinement, step by step, on a scripted backend.

A detection produces an image handle; the agent describes it, asks itself
detail questions, gates on the perception check, verifies each extracted
attribute under the three-way answer mode, and rewrites the description
with the uncertain attributes filtered out.
"""

import json

from asknav import Facts, StubBackend, StubScript
from asknav.questioner import SelfQuestioner

IMG = "img://demo/shelf-picture"

script = StubScript.from_json(json.dumps([
    {"match": {"role": "VisualQA", "mode": "FreeText", "prompt_contains": "Describe the picture"},
     "response": {"text": "A picture hanging above a shelf."}},
    {"match": {"role": "TextGen", "prompt_contains": "follow-up questions"},
     "response": {"text": "What does the picture show?\nWhat color is the frame?"}},
    {"match": {"role": "VisualQA", "mode": "FreeText", "prompt_contains": "What does the picture show?"},
     "response": {"text": "It shows a mountain lake."}},
    {"match": {"role": "VisualQA", "mode": "FreeText", "prompt_contains": "What color is the frame?"},
     "response": {"text": "The frame looks dark, maybe black."}},
    {"match": {"mode": "RestrictedVocab", "prompt_contains": "Does the image contain a picture?"},
     "response": {"raw_scores": {"Yes": 12.0, "No": 0.0, "IDK": 0.0}}},
    {"match": {"role": "TextGen", "prompt_contains": "JSON array"},
     "response": {"text": json.dumps([
         {"key": "content", "value": "a mountain lake", "questions": ["Does the picture show a lake?"]},
         {"key": "frame", "value": "black", "questions": ["Is the frame black?"]},
     ])}},
    # the VLM is sure about the lake, torn about the frame color
    {"match": {"mode": "RestrictedVocab", "prompt_contains": "Does the picture show a lake?"},
     "response": {"raw_scores": {"Yes": 9.0, "No": 0.0, "IDK": 0.0}}},
    {"match": {"mode": "RestrictedVocab", "prompt_contains": "Is the frame black?"},
     "response": {"raw_scores": {"Yes": 0.4, "No": 0.3, "IDK": 0.3}}},
    {"match": {"role": "TextGen", "prompt_contains": "Rewrite the object description"},
     "response": {"text": "A picture of a mountain lake hanging above a shelf."}},
]))

backend = StubBackend(script)
agent = SelfQuestioner(llm=backend, vlm=backend, tau=0.75)
facts = Facts("picture")  # seeded with "Find the picture"

record = agent.run(facts, IMG, "picture")

print("initial description:\n ", record.s_init)
print("\nenriched description:\n ", record.s_enriched.replace("\n", "\n  "))
print("\nperception check:", record.check_answer, f"(u={record.check.u:.4f})")
print("\nattribute verification:")
for item in record.qa_items:
    certainty = "Certain" if item.u <= agent.tau else "Uncertain"
    print(f"  {item.question:<35} -> {item.answer:<4} u={item.u:.3f} ({certainty})")
print("\nrefined description:\n ", record.s_refined)
print("\nnote: the frame color was dropped, its answer entropy was too high.")
