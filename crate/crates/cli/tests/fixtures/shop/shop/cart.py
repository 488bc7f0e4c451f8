from shop.models.product import Product
from shop.pricing import rules
from shop.pricing.tax import with_tax


class Cart:
    def __init__(self):
        self.items = []

    def add(self, product):
        self.items.append(product)

    def subtotal(self):
        return sum(p.price for p in self.items)

    def total(self, rate):
        discounted = rules.apply_discount(self.subtotal(), rate)
        return with_tax(discounted)


def quick_cart(ident, price):
    cart = Cart()
    cart.add(Product(ident, price))
    return cart
