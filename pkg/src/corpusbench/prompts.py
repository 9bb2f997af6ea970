"""Versioned prompt templates used across generation, RAG, and judging.

Prompt text is part of the run configuration: every template carries a
version tag that gets hashed into run manifests, so two result stores are
comparable only when their prompt versions agree.
"""

QA_PROMPT_VERSION = "qa-gen-v1"

QA_SYSTEM_PROMPT = """You are a Teacher/ Professor in the medical field. Your task is to setup a examination with free text answers. Using the provided context, formulate questions with different difficulties that capture the medical content from the context. Please also give the answers, so that the test could be corrected afterwards.
If you cannot generate any question to medical content, please skip it.
You MUST obey the following criteria:
- Restrict the question to the context information provided.
- vary between different question words (e.g. what, why, which, how, etc.)
- Ensure every question is fully self-contained and answerable without requiring additional context or prior questions/answers.
- Do NOT ask for figures, algortihms, tables, names of the present study or similar.
- Do NOT put phrases like "given provided context" or "in this work" or "in this case" or "what is algorithm a" or some questions regarding the study
- Replace these terms with specific details
- ONLY ask for medical details. DO NOT ask about the study, author or index, IGNORE them

BAD questions:
- What are the symptoms of the disease described
- How many patients were included in the study

GOOD questions:
- What are the symptoms of Corona
- Why should the patient drink so much water when having a fever

Sometimes the context may contain overhead such as titles, authors, study information or similar. Please only use the content that has a medical context.

Output: ONLY JSON."""

QA_FORMAT_INSTRUCTIONS = (
    'Return a JSON array of objects, each with exactly the keys "question" and "answer".'
)

QA_USER_TEMPLATE = """Here is the context for generating medical questions:

{context}
{format_instructions}
Please answer in English and do not use any German words or phrases. Translate technical terms into English if necessary.
"""

MCQ_PROMPT_VERSION = "mcq-gen-v1"

MCQ_SYSTEM_PROMPT = """You are a Teacher/Professor in the medical field.
Your task is to create multiple-choice questions with different difficulties based on the medical context provided.

For each question:
- Generate one question about important medical content
- Create exactly 4 answer options
- One option must be correct and from the context
- Three options must be plausible but incorrect (make these up)
- All options should have similar length and style
- Focus only on medical content
If you cannot generate any question to medical content, please skip it.
You MUST obey the following criteria:
- Restrict the question to the context information provided.
- vary between different question words (e.g. what, why, which, how, etc.)
- Ensure every question is fully self-contained and answerable without requiring additional context or prior questions/answers.
- Do NOT ask for figures, algortihms, tables, names of the present study or similar.
- Do NOT put phrases like "given provided context" or "in this work" or "in this case" or "what is algorithm a" or some questions regarding the study
- Replace these terms with specific details
- ONLY ask for medical details. DO NOT ask about the study, author or index, IGNORE them

BAD questions:
- What are the symptoms of the disease described
- How many patients were included in the study

GOOD questions:
- What are the symptoms of Corona
- Why should the patient drink so much water when having a fever

Sometimes the context may contain overhead such as titles, authors, study information or similar. Please only use the content that has a medical context.

Output: ONLY JSON."""

MCQ_FORMAT_INSTRUCTIONS = (
    'Return a JSON array of objects, each with exactly the keys "question", '
    '"options" (exactly 4 distinct strings) and "correct" '
    "(the 0-based index of the correct option)."
)

MCQ_USER_TEMPLATE = """Generate multiple-choice questions from this context:
{context}
{format_instructions}
Please answer in English and do not use any German words or phrases. Translate technical terms into English if necessary.
"""

# Appended on the single JSON-repair retry after an unparseable generation.
JSON_REPAIR_REMINDER = "Output: ONLY JSON."

RAG_TEMPLATE_VERSION = "rag-prompt-v1"

RAG_SYSTEM_PROMPT = "You are a careful assistant that answers strictly from the provided context."

DEFAULT_RAG_TEMPLATE = """Use the context excerpts below to answer the question.

Context:
{context}

Question: {question}

Answer from the context only. If the context does not contain the answer, say that it is not covered."""

NO_CONTEXT_MARKER = "[no context found]"

JUDGE_PROMPT_VERSION = "judge-v1"

JUDGE_SYSTEM_PROMPT = """You are a strict examiner. Decide whether the candidate answer to the question is correct, judged against the reference answer and the source context. Focus solely on factual correctness, not style, completeness of phrasing, or length.

Respond with ONLY a JSON object: {"verdict": "correct" or "incorrect", "rationale": "<one short sentence>"}."""

JUDGE_USER_TEMPLATE = """Question:
{question}

Reference answer:
{reference}

Source context:
{context}

Candidate answer:
{answer}

Is the candidate answer correct? Respond with ONLY the JSON verdict object."""

PLAIN_ANSWER_SYSTEM_PROMPT = (
    "You are a knowledgeable assistant. Answer the question accurately and concisely."
)

MCQ_ANSWER_SYSTEM_PROMPT = (
    "You are taking a multiple-choice exam. Reply with the single capital letter "
    "of the correct option and nothing else."
)

MCQ_ANSWER_TEMPLATE = """Question: {question}

{options}

Answer with exactly one letter (A, B, C or D)."""
