# Generated by Django 5.2.7 on 2026-10-18 10:00

from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='SolveRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('algorithm', models.CharField(max_length=32)),
                ('instance_path', models.CharField(blank=True, max_length=500)),
                ('instance_fingerprint', models.CharField(db_index=True, max_length=64)),
                ('seed', models.BigIntegerField()),
                ('repetitions', models.PositiveIntegerField(default=1)),
                ('objective', models.FloatField(blank=True, null=True)),
                ('task_satisfaction', models.FloatField(blank=True, null=True)),
                ('social_satisfaction', models.FloatField(blank=True, null=True)),
                ('status', models.CharField(choices=[('ok', 'ok'), ('failed', 'failed')], default='ok', max_length=16)),
                ('error', models.TextField(blank=True)),
                ('report_json', models.JSONField(blank=True, null=True)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
            ],
            options={
                'ordering': ['-created_at'],
            },
        ),
    ]
