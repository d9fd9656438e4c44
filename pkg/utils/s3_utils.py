import os
from typing import Dict, List, Tuple

import boto3
from botocore.exceptions import BotoCoreError, ClientError

from utils.logger import setup_logger

logger = setup_logger("s3_utils")

CONTENT_TYPES = {
    ".json": "application/json",
    ".csv": "text/csv",
    ".mtx": "text/plain",
    ".txt": "text/plain",
}


def _get_s3_client():
    region = os.getenv("AWS_REGION", "us-east-1")
    return boto3.client("s3", region_name=region)


def parse_s3_uri(uri: str) -> Tuple[str, str]:
    """Separa `s3://bucket/prefixo` em (bucket, prefixo sem barras nas pontas)."""
    if not uri.startswith("s3://"):
        raise ValueError(f"output.s3_uri precisa começar com s3://, recebeu {uri!r}")
    bucket, _, prefix = uri[len("s3://"):].partition("/")
    if not bucket:
        raise ValueError(f"output.s3_uri sem bucket: {uri!r}")
    return bucket, prefix.strip("/")


def artifact_key(prefix: str, local_path: str) -> str:
    name = os.path.basename(local_path)
    return f"{prefix}/{name}" if prefix else name


def _upload_artifact(client, bucket: str, key: str, local_path: str) -> bool:
    extension = os.path.splitext(local_path)[1].lower()
    extra = {"ContentType": CONTENT_TYPES.get(extension, "application/octet-stream")}
    try:
        client.upload_file(local_path, bucket, key, ExtraArgs=extra)
    except (ClientError, BotoCoreError) as e:
        logger.error(f"Falha ao arquivar {local_path} em s3://{bucket}/{key}: {e}")
        return False
    logger.info(f"Artefato arquivado em s3://{bucket}/{key}")
    return True


def archive_artifacts(s3_uri: str, local_paths: List[str]) -> Dict[str, bool]:
    """Envia relatório, CSV e operadores de uma execução para o prefixo S3.

    Um único cliente por execução. Falhas ficam no log e no retorno, nunca
    interrompem a verificação.
    """
    bucket, prefix = parse_s3_uri(s3_uri)
    missing = [p for p in local_paths if not os.path.exists(p)]
    for path in missing:
        logger.warning(f"Artefato não encontrado para arquivamento: {path}")
    result: Dict[str, bool] = {path: False for path in missing}

    present = [p for p in local_paths if p not in result]
    if not present:
        return result
    client = _get_s3_client()
    for path in present:
        result[path] = _upload_artifact(client, bucket, artifact_key(prefix, path), path)
    sent = sum(result.values())
    logger.info(f"{sent}/{len(local_paths)} artefatos arquivados em s3://{bucket}/{prefix}")
    return result
