"""Walk a markdown document through cleaning, chapter windows, and chunking.

Run: python3 demos/01_corpus_to_chunks.py
"""

from corpusbench import CorpusDocument, chunk_document, clean_document, split_chapters
from corpusbench.corpus import ChunkStrategy

RAW = """# Cardiac output

Cardiac output is the product of heart rate and stroke volume. Exercise raises
both factors within seconds. Trained athletes reach higher outputs at lower rates.

# Venous return

Venous return must match cardiac output over any sustained period. Skeletal
muscle pumping accelerates return during movement. Respiration modulates
return with every breath.

## References

Fictional A. A fictional reference list that cleaning removes.
"""


def main():
    cleaned = clean_document(RAW)
    print("--- cleaning ---")
    print(f"raw: {len(RAW)} chars, cleaned: {len(cleaned)} chars "
          f"(references section removed: {'References' not in cleaned})")

    doc = CorpusDocument(id="demo", path="inline", title="Cardiac output",
                         raw_text=RAW, cleaned_text=cleaned)

    print("\n--- chapter windows (generation units) ---")
    for chapter in split_chapters(doc):
        print(f"chapter {chapter.index}: heading={chapter.heading!r} "
              f"tokens={chapter.token_estimate}")

    print("\n--- recursive chunks (retrieval units) ---")
    for chunk in chunk_document(doc, size=32, overlap=8):
        print(f"{chunk.chunk_id}: tokens={chunk.token_count} span={chunk.char_span}")

    print("\n--- markdown-header chunks ---")
    for chunk in chunk_document(doc, strategy=ChunkStrategy.MARKDOWN_HEADER):
        print(f"{chunk.chunk_id}: first line = {chunk.text.splitlines()[0]!r}")


if __name__ == "__main__":
    main()
