from __future__ import annotations

from django.db import models


class SolveRun(models.Model):
    """One `solve` invocation stored with `--record`; the report file stays the primary output."""

    STATUS_OK = "ok"
    STATUS_FAILED = "failed"
    STATUS_CHOICES = [
        (STATUS_OK, "ok"),
        (STATUS_FAILED, "failed"),
    ]

    algorithm = models.CharField(max_length=32)
    instance_path = models.CharField(max_length=500, blank=True)
    instance_fingerprint = models.CharField(max_length=64, db_index=True)
    seed = models.BigIntegerField()
    repetitions = models.PositiveIntegerField(default=1)
    objective = models.FloatField(null=True, blank=True)
    task_satisfaction = models.FloatField(null=True, blank=True)
    social_satisfaction = models.FloatField(null=True, blank=True)
    status = models.CharField(max_length=16, choices=STATUS_CHOICES, default=STATUS_OK)
    error = models.TextField(blank=True)
    report_json = models.JSONField(null=True, blank=True)
    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        ordering = ["-created_at"]

    def __str__(self) -> str:
        return f"{self.algorithm} on {self.instance_fingerprint[:12]} ({self.status})"
