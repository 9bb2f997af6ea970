"""Generate synthetic Q&A and multiple-choice items from a chapter with the
deterministic mock generator, then dedup, split, and profile the dataset.

Run: python3 demos/02_synthetic_datasets.py
"""

from corpusbench import dedup, generate_mcq, generate_qa, profile_dataset, split_dataset
from corpusbench.corpus import Chapter
from corpusbench.mocks import MockChatClient

CHAPTER = Chapter(
    doc_id="demo-doc", index=0, heading="Valves",
    text=("The aortic valve opens during systole and closes in diastole. "
          "Valve leaflets coapt to prevent regurgitant flow. "
          "Calcific degeneration stiffens leaflets in older patients. "
          "Auscultation localizes murmurs to specific valve areas. "
          "Doppler imaging quantifies gradients across stenotic valves."),
    token_estimate=60,
)


def main():
    qa_generator = MockChatClient("qa-generator", params={"max_items": 5})
    mcq_generator = MockChatClient("mcq-generator", params={"max_items": 3})

    pairs = generate_qa(CHAPTER, qa_generator)
    print(f"generated {len(pairs)} Q&A pairs; first one:")
    print(f"  Q: {pairs[0].question}")
    print(f"  A: {pairs[0].answer}")
    print(f"  faithfulness vs chapter: {pairs[0].faithfulness_score:.2f}")

    items = generate_mcq(CHAPTER, mcq_generator)
    print(f"\ngenerated {len(items)} MCQ items; first one:")
    for letter, option in zip("ABCD", items[0].options):
        marker = " (correct)" if items[0].options.index(option) == items[0].correct_index else ""
        print(f"  {letter}. {option[:60]}{marker}")

    pairs = dedup(pairs)
    labeled = split_dataset(pairs, seed=7)
    profile = profile_dataset(labeled)
    print(f"\ndataset profile: {profile.n_items} items, "
          f"mean Flesch {profile.mean_flesch:.1f}, splits {profile.split_counts}")


if __name__ == "__main__":
    main()
