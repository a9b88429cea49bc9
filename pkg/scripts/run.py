"""
Sample script to run quick tests
"""


from diffsbt.corpus import build_example, passes_filters
from diffsbt.diffing import CommitRecord, FileChange, compute_diff, render_unified_diff
from diffsbt.metrics import bleu4, evaluate_corpus
from diffsbt.retrieval_explainer import build_index, explain
from diffsbt.sbt_encoder import diffsbt_buggy, diffsbt_full

BUGGY = '''def scrape_lyrics(soup):
    names = []
    for tag in soup.find_all('a'):
        name_str = tag.get_text()
        names.append(name_str)
        sanitize(name_str)
    return names
'''
FIXED = BUGGY.replace('        sanitize(name_str)', '    sanitize(name_str)')

# One bug-fix commit
record = CommitRecord('demo/lyrics', 'a1b2c3d', 'fix sanitize call placed inside the loop',
                      (FileChange('lyrics/scrape.py', BUGGY, FIXED),))
diff = compute_diff(BUGGY, FIXED)
print(render_unified_diff(diff, 'lyrics/scrape.py'))
print(passes_filters(record))

# Pre-training input, then the buggy side alone
print(diffsbt_full(record))
print(diffsbt_buggy(record))
print(build_example(record, 'finetune').as_dict())

# Retrieval baseline over a tiny corpus
index = build_index([
    (render_unified_diff(diff, 'lyrics/scrape.py'), record.message),
    ('- x = 1 + x = 2', 'fix off by one in x'),
])
message, provenance = explain(index, '- x = 1 + x = 3')
print(message, provenance)
print(bleu4(message, 'fix off by one error in x'))
print(evaluate_corpus([('q1', message, 'fix off by one error in x')]))
