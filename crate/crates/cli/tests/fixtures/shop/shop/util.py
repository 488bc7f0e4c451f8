def log(message):
    print(message)


def format_money(amount):
    return "%.2f" % amount
