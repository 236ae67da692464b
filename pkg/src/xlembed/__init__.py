"""Cross-lingual contrastive distillation for text encoders, with a task-family benchmark harness.

Modules: ``datamodel`` (records and validation), ``pipeline`` (expansion and
QE filtering), ``mining`` (hard negatives and teacher scores), ``encoder``
(toy trainable encoder), ``objective`` (contrastive + distillation loss),
``trainer``, ``evaluator`` (family metrics), ``bench`` (manifests,
aggregation, reports), ``synthetic`` (a toy multilingual world) and ``cli``.
"""

__version__ = "0.1.0"
